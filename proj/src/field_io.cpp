#include "lqglab/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace lqglab {

static_assert(std::endian::native == std::endian::little, "binary field format assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("read_field_binary: truncated input");
  return v;
}

}  // namespace

void write_field_binary(std::ostream& out, const Field& field) {
  const auto& d = field.domain;
  out.write("LQGF", 4);
  put<std::uint32_t>(out, kFieldFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.shape));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.nx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.ny));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.outer_cells));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.inner_cells));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(field.boundary));
  put<double>(out, d.mesh);
  put<double>(out, d.origin.real());
  put<double>(out, d.origin.imag());
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(sizeof(double) * field.values.size()));
}

Field read_field_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LQGF", 4) != 0) throw ConfigError("read_field_binary: bad magic");
  if (get<std::uint32_t>(in) != kFieldFormatVersion) throw ConfigError("read_field_binary: unsupported version");
  LatticeDomain d;
  d.shape = static_cast<DomainShape>(get<std::uint32_t>(in));
  d.nx = static_cast<int>(get<std::uint32_t>(in));
  d.ny = static_cast<int>(get<std::uint32_t>(in));
  d.outer_cells = static_cast<int>(get<std::uint32_t>(in));
  d.inner_cells = static_cast<int>(get<std::uint32_t>(in));
  const auto bc = static_cast<BoundaryCondition>(get<std::uint32_t>(in));
  d.mesh = get<double>(in);
  const double ox = get<double>(in), oy = get<double>(in);
  d.origin = Point(ox, oy);
  d.validate();
  Field f(d, bc);
  in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(sizeof(double) * f.values.size()));
  if (!in) throw ConfigError("read_field_binary: truncated values");
  return f;
}

void save_field(const std::string& path, const Field& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("save_field: cannot open " + path);
  write_field_binary(out, field);
}

Field load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_field: cannot open " + path);
  return read_field_binary(in);
}

void write_field_csv(std::ostream& out, const Field& field) {
  out << "i,j,x,y,value\n" << std::setprecision(17);
  for (int j = 0; j < field.domain.ny; ++j) {
    for (int i = 0; i < field.domain.nx; ++i) {
      const Point c = field.domain.cell_center(i, j);
      out << i << ',' << j << ',' << c.real() << ',' << c.imag() << ',' << field(i, j) << '\n';
    }
  }
}

}  // namespace lqglab
