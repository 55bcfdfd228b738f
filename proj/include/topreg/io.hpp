#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "topreg/grid.hpp"
#include "topreg/optimizer.hpp"
#include "topreg/segmenter.hpp"

namespace topreg {

static_assert(std::endian::native == std::endian::little,
              "raw payloads are written little-endian");

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// P5 portable graymap (2D images, labels, masks).

struct PgmImage {
  int width = 0, height = 0, maxval = 255;
  std::vector<std::uint16_t> data;  // row-major, top row first
};

namespace detail {
inline int pgm_next_int(std::istream& in) {
  // whitespace/comment-tolerant header token
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) throw IoError("pgm: truncated header");
  int v = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("pgm: malformed header");
  return v;
}
}  // namespace detail

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open " + path);
  char m0 = static_cast<char>(in.get()), m1 = static_cast<char>(in.get());
  if (m0 != 'P' || m1 != '5') throw IoError("pgm: not a P5 graymap: " + path);
  PgmImage img;
  img.width = detail::pgm_next_int(in);
  img.height = detail::pgm_next_int(in);
  img.maxval = detail::pgm_next_int(in);
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535)
    throw IoError("pgm: bad dimensions/maxval in " + path);
  std::size_t npix = static_cast<std::size_t>(img.width) * img.height;
  img.data.resize(npix);
  if (img.maxval < 256) {
    std::vector<std::uint8_t> raw(npix);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(npix));
    if (static_cast<std::size_t>(in.gcount()) != npix) throw IoError("pgm: truncated payload in " + path);
    for (std::size_t i = 0; i < npix; ++i) img.data[i] = raw[i];
  } else {
    // two-byte samples, most significant byte first per the PNM spec
    std::vector<std::uint8_t> raw(2 * npix);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * npix));
    if (static_cast<std::size_t>(in.gcount()) != 2 * npix) throw IoError("pgm: truncated payload in " + path);
    for (std::size_t i = 0; i < npix; ++i)
      img.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

inline void write_pgm(const std::string& path, int width, int height,
                      const std::vector<std::uint8_t>& data) {
  if (data.size() != static_cast<std::size_t>(width) * height)
    throw IoError("pgm: payload size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot write " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("pgm: write failed for " + path);
}

// ---------------------------------------------------------------------------
// MetaImage-style 3D volumes: text header, raw little-endian payload.

struct MhaVolume {
  int nx = 0, ny = 0, nz = 0;
  std::string element_type;  // MET_UCHAR | MET_USHORT | MET_FLOAT
  std::vector<double> data;  // promoted to double, x fastest
};

inline MhaVolume read_mha(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("mha: cannot open " + path);
  MhaVolume vol;
  int ndims = 0;
  bool local_data = false;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("mha: malformed header line: " + line);
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t");
      std::size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "NDims") {
      ndims = std::stoi(value);
    } else if (key == "DimSize") {
      std::istringstream vs(value);
      vs >> vol.nx >> vol.ny >> vol.nz;
    } else if (key == "ElementType") {
      vol.element_type = value;
    } else if (key == "ElementDataFile") {
      if (value != "LOCAL") throw IoError("mha: only ElementDataFile = LOCAL is supported");
      local_data = true;
      break;
    }
    // other keys are tolerated and ignored
  }
  if (ndims != 3) throw IoError("mha: NDims must be 3 in " + path);
  if (!local_data) throw IoError("mha: missing ElementDataFile in " + path);
  if (vol.nx <= 0 || vol.ny <= 0 || vol.nz <= 0) throw IoError("mha: bad DimSize in " + path);
  std::size_t npix = static_cast<std::size_t>(vol.nx) * vol.ny * vol.nz;
  std::size_t esize;
  if (vol.element_type == "MET_UCHAR") esize = 1;
  else if (vol.element_type == "MET_USHORT") esize = 2;
  else if (vol.element_type == "MET_FLOAT") esize = 4;
  else throw IoError("mha: unsupported ElementType " + vol.element_type);
  std::vector<std::uint8_t> raw(npix * esize);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError("mha: payload byte count mismatch in " + path);
  if (in.peek() != EOF) throw IoError("mha: trailing bytes after payload in " + path);
  vol.data.resize(npix);
  if (esize == 1) {
    for (std::size_t i = 0; i < npix; ++i) vol.data[i] = raw[i];
  } else if (esize == 2) {
    for (std::size_t i = 0; i < npix; ++i) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      vol.data[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < npix; ++i) {
      float v;
      std::memcpy(&v, raw.data() + 4 * i, 4);
      vol.data[i] = v;
    }
  }
  return vol;
}

inline void write_mha_uchar(const std::string& path, int n, const std::vector<std::uint8_t>& data) {
  if (data.size() != static_cast<std::size_t>(n) * n * n) throw IoError("mha: payload size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("mha: cannot write " + path);
  out << "NDims = 3\n"
      << "DimSize = " << n << " " << n << " " << n << "\n"
      << "ElementType = MET_UCHAR\n"
      << "ElementDataFile = LOCAL\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("mha: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Transformation fields: small text header, raw little-endian float64 payload
// in the component-major lexicographic ordering.

inline void write_field(const std::string& path, const GridSpec& g, const std::vector<double>& Y) {
  require_nodal(g, Y, "write_field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("field: cannot write " + path);
  out << "TPRField 1\n"
      << "dim " << g.dim << "\n"
      << "n " << g.n << "\n"
      << "bc " << (g.bc == BoundaryCondition::Dirichlet ? "dirichlet" : "natural") << "\n"
      << "data float64 " << Y.size() << "\n";
  out.write(reinterpret_cast<const char*>(Y.data()),
            static_cast<std::streamsize>(Y.size() * sizeof(double)));
  if (!out) throw IoError("field: write failed for " + path);
}

inline std::pair<GridSpec, std::vector<double>> read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("field: cannot open " + path);
  std::string magic, bc_str, tag, dtype;
  int version = 0, dim = 0, n = 0;
  std::size_t count = 0;
  in >> magic >> version;
  if (magic != "TPRField" || version != 1) throw IoError("field: bad magic in " + path);
  in >> tag >> dim;
  if (tag != "dim") throw IoError("field: bad header in " + path);
  in >> tag >> n;
  if (tag != "n") throw IoError("field: bad header in " + path);
  in >> tag >> bc_str;
  if (tag != "bc") throw IoError("field: bad header in " + path);
  in >> tag >> dtype >> count;
  if (tag != "data" || dtype != "float64") throw IoError("field: bad header in " + path);
  in.get();  // newline before payload
  GridSpec g(dim, n, bc_str == "dirichlet" ? BoundaryCondition::Dirichlet : BoundaryCondition::Natural);
  if (count != g.dof_count()) throw IoError("field: header count mismatch in " + path);
  std::vector<double> Y(count);
  in.read(reinterpret_cast<char*>(Y.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
    throw IoError("field: truncated payload in " + path);
  return {g, std::move(Y)};
}

// ---------------------------------------------------------------------------
// Boundary geometry: plain-text vertex lines then index lines (1-based,
// OBJ-compatible: `v ...` and `l a b` / `f a b c`).

inline void write_geometry(const std::string& path, const std::vector<Geometry>& geoms,
                           const std::vector<int>& regions) {
  std::ofstream out(path);
  if (!out) throw IoError("mesh: cannot write " + path);
  out << std::setprecision(17);
  int base = 1;
  for (std::size_t gi = 0; gi < geoms.size(); ++gi) {
    const Geometry& geom = geoms[gi];
    out << "o region_" << (gi < regions.size() ? regions[gi] : static_cast<int>(gi + 1)) << "\n";
    std::size_t nv = geom.vertex_count();
    for (std::size_t v = 0; v < nv; ++v) {
      out << "v";
      for (int p = 0; p < geom.dim; ++p) out << " " << geom.vertices[v * geom.dim + p];
      if (geom.dim == 2) out << " 0";
      out << "\n";
    }
    for (const auto& s : geom.segments) out << "l " << base + s[0] << " " << base + s[1] << "\n";
    for (const auto& t : geom.triangles)
      out << "f " << base + t[0] << " " << base + t[1] << " " << base + t[2] << "\n";
    base += static_cast<int>(nv);
  }
  if (!out) throw IoError("mesh: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Energy log and run summary.

inline void write_energy_log(const std::string& path, const std::vector<IterationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("log: cannot write " + path);
  out << "level,iteration,F,fit,length,surface,volume,grad_norm,eta,minres_iters,min_det,max_det\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.level << ',' << r.iteration << ',' << r.F << ',' << r.fit << ',' << r.length << ','
        << r.surface << ',' << r.volume << ',' << r.grad_norm << ',' << r.eta << ','
        << r.minres_iters << ',' << r.min_det << ',' << r.max_det << "\n";
  }
  if (!out) throw IoError("log: write failed for " + path);
}

}  // namespace topreg
