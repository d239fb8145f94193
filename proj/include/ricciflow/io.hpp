#pragma once

// Shared metric-file format: a self-describing text header (dim, axes,
// manifold dimension, field names/shapes, domain and kind flags) followed by
// row-major flat arrays, either as %.17g text (bit-exact round trip) or as a
// little-endian float64 binary payload.  Every module reads and writes the
// same format; warped metrics store their two profiles with kind "warped".

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/rotsym.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

enum class FileFormat { text, binary };

// Loaded contents of a metric file.  The grid lives on the heap so the fields
// can reference it across moves; accessors returning tensor views (as_metric,
// as_warped) borrow that grid, so the MetricFile must outlive them.
struct MetricFile {
  std::unique_ptr<GridSpec> grid;
  int n = 0;                     // manifold dimension (= grid dim for tensor files)
  std::string kind = "metric";   // "metric" | "warped"
  std::string domain = "full";   // "full" | "half" | "doubled"
  std::vector<std::string> names;
  std::vector<GridField> fields;

  const GridField& field(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return fields[i];
    throw ConfigError("metric file: no field named '" + name + "'");
  }
};

namespace detail {

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_le64(std::string& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  if constexpr (std::endian::native == std::endian::big) {
    u = ((u & 0x00000000000000ffULL) << 56) | ((u & 0x000000000000ff00ULL) << 40) |
        ((u & 0x0000000000ff0000ULL) << 24) | ((u & 0x00000000ff000000ULL) << 8) |
        ((u & 0x000000ff00000000ULL) >> 8) | ((u & 0x0000ff0000000000ULL) >> 24) |
        ((u & 0x00ff000000000000ULL) >> 40) | ((u & 0xff00000000000000ULL) >> 56);
  }
  char b[8];
  std::memcpy(b, &u, 8);
  out.append(b, 8);
}

inline double get_le64(const char* p) {
  std::uint64_t u;
  std::memcpy(&u, p, 8);
  if constexpr (std::endian::native == std::endian::big) {
    u = ((u & 0x00000000000000ffULL) << 56) | ((u & 0x000000000000ff00ULL) << 40) |
        ((u & 0x0000000000ff0000ULL) << 24) | ((u & 0x00000000ff000000ULL) << 8) |
        ((u & 0x000000ff00000000ULL) >> 8) | ((u & 0x0000ff0000000000ULL) >> 24) |
        ((u & 0x00ff000000000000ULL) >> 40) | ((u & 0xff00000000000000ULL) >> 56);
  }
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

// Serialize named fields over one grid.  All fields must live on `g`.
inline void write_metric_file(const std::string& path, const GridSpec& g, int n,
                              const std::string& kind, const std::string& domain,
                              const std::vector<std::pair<std::string, const GridField*>>& fields,
                              FileFormat fmt = FileFormat::text) {
  std::string out;
  out += "ricciflow-metric 1\n";
  out += "kind " + kind + "\n";
  out += "domain " + domain + "\n";
  out += "n " + std::to_string(n) + "\n";
  out += "dim " + std::to_string(g.dim()) + "\n";
  for (int a = 0; a < g.dim(); ++a) {
    const AxisSpec& ax = g.axis(a);
    out += std::string("axis ") + topology_name(ax.topo) + " " +
           detail::format_g17(ax.extent) + " " + std::to_string(ax.nodes) + "\n";
  }
  out += "fields " + std::to_string(fields.size()) + "\n";
  for (const auto& [name, f] : fields) {
    if (&f->grid() != &g || f->size() != g.node_count() * static_cast<std::size_t>(f->ncomp()))
      throw ConfigError("metric file: field '" + name + "' does not live on the given grid");
    out += "field " + name + " " + std::to_string(f->ncomp()) + "\n";
  }
  out += std::string("format ") + (fmt == FileFormat::text ? "text" : "binary") + "\n";
  out += "data\n";
  if (fmt == FileFormat::text) {
    for (const auto& [name, f] : fields) {
      (void)name;
      for (std::size_t id = 0; id < g.node_count(); ++id) {
        for (int c = 0; c < f->ncomp(); ++c) {
          if (c) out += ' ';
          out += detail::format_g17(f->at(id, c));
        }
        out += '\n';
      }
    }
  } else {
    for (const auto& [name, f] : fields) {
      (void)name;
      for (std::size_t i = 0; i < f->size(); ++i) detail::put_le64(out, f->data()[i]);
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("metric file: cannot open '" + path + "' for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw ConfigError("metric file: short write to '" + path + "'");
}

inline void write_metric_file(const std::string& path, const MetricField& g,
                              FileFormat fmt = FileFormat::text,
                              const std::string& domain = "full") {
  write_metric_file(path, g.grid(), g.dim(), "metric", domain,
                    {{"g", &g.components()}}, fmt);
}

inline void write_metric_file(const std::string& path, const WarpedMetric& wm,
                              FileFormat fmt = FileFormat::text) {
  write_metric_file(path, wm.grid(), wm.n, "warped",
                    wm.hemisphere ? "doubled" : "full",
                    {{"psi", &wm.psi}, {"phi", &wm.phi}}, fmt);
}

inline MetricFile read_metric_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("metric file: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string raw = ss.str();

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    while (pos < raw.size()) {
      std::size_t eol = raw.find('\n', pos);
      if (eol == std::string::npos) eol = raw.size();
      std::string line = raw.substr(pos, eol - pos);
      pos = eol + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return line;
    }
    throw ConfigError("metric file: truncated header in '" + path + "'");
  };
  auto expect_key = [&](const std::string& key) -> std::string {
    const std::string line = next_line();
    if (line.rfind(key + " ", 0) != 0)
      throw ConfigError("metric file: expected '" + key + " ...', got '" + line + "'");
    return line.substr(key.size() + 1);
  };

  if (next_line() != "ricciflow-metric 1")
    throw ConfigError("metric file: '" + path + "' is not a ricciflow metric file");
  MetricFile mf;
  mf.kind = expect_key("kind");
  if (mf.kind != "metric" && mf.kind != "warped")
    throw ConfigError("metric file: unknown kind '" + mf.kind + "'");
  mf.domain = expect_key("domain");
  mf.n = std::stoi(expect_key("n"));
  const int dim = std::stoi(expect_key("dim"));
  std::vector<AxisSpec> axes;
  for (int a = 0; a < dim; ++a) {
    std::istringstream ls(expect_key("axis"));
    std::string topo;
    AxisSpec ax;
    if (!(ls >> topo >> ax.extent >> ax.nodes))
      throw ConfigError("metric file: malformed axis line");
    ax.topo = topology_from_name(topo);
    axes.push_back(ax);
  }
  mf.grid = std::make_unique<GridSpec>(std::move(axes));

  const int nfields = std::stoi(expect_key("fields"));
  std::vector<int> ncomp;
  for (int f = 0; f < nfields; ++f) {
    std::istringstream ls(expect_key("field"));
    std::string name;
    int nc = 0;
    if (!(ls >> name >> nc) || nc <= 0)
      throw ConfigError("metric file: malformed field line");
    mf.names.push_back(name);
    ncomp.push_back(nc);
  }
  const std::string fmt = expect_key("format");
  if (fmt != "text" && fmt != "binary")
    throw ConfigError("metric file: unknown format '" + fmt + "'");
  if (next_line() != "data") throw ConfigError("metric file: missing data marker");

  for (int f = 0; f < nfields; ++f) {
    GridField gf(*mf.grid, ncomp[f]);
    if (fmt == "text") {
      for (std::size_t i = 0; i < gf.size(); ++i) {
        while (pos < raw.size() &&
               (raw[pos] == ' ' || raw[pos] == '\n' || raw[pos] == '\r'))
          ++pos;
        if (pos >= raw.size())
          throw ConfigError("metric file: truncated data in '" + path + "'");
        char* end = nullptr;
        gf.data()[i] = std::strtod(raw.c_str() + pos, &end);
        if (end == raw.c_str() + pos)
          throw ConfigError("metric file: bad numeric data in '" + path + "'");
        pos = static_cast<std::size_t>(end - raw.c_str());
      }
    } else {
      const std::size_t bytes = gf.size() * 8;
      if (raw.size() - pos < bytes)
        throw ConfigError("metric file: truncated binary data in '" + path + "'");
      for (std::size_t i = 0; i < gf.size(); ++i)
        gf.data()[i] = detail::get_le64(raw.data() + pos + i * 8);
      pos += bytes;
    }
    mf.fields.push_back(std::move(gf));
  }
  return mf;
}

// Tensor-metric view of a loaded file; borrows mf.grid.
inline MetricField as_metric(const MetricFile& mf) {
  if (mf.kind != "metric")
    throw ConfigError("metric file: expected kind 'metric', got '" + mf.kind + "'");
  const GridField& comp = mf.field("g");
  const int d = mf.grid->dim();
  if (comp.ncomp() != d * d)
    throw ConfigError("metric file: field 'g' has wrong component count");
  MetricField g(*mf.grid);
  g.mutable_components() = comp;
  g.mutable_components().set_tensor_parity(2);
  return g;
}

// Warped-metric view of a loaded file; borrows mf.grid.
inline WarpedMetric as_warped(const MetricFile& mf) {
  if (mf.kind != "warped")
    throw ConfigError("metric file: expected kind 'warped', got '" + mf.kind + "'");
  WarpedMetric wm(*mf.grid, mf.n, mf.domain == "doubled");
  const GridField &psi = mf.field("psi"), &phi = mf.field("phi");
  if (psi.ncomp() != 1 || phi.ncomp() != 1)
    throw ConfigError("metric file: warped profiles must be scalar fields");
  for (std::size_t id = 0; id < mf.grid->node_count(); ++id) {
    wm.psi.at(id, 0) = psi.at(id, 0);
    wm.phi.at(id, 0) = phi.at(id, 0);
  }
  return wm;
}

}  // namespace ricci
