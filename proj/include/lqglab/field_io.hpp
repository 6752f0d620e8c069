#pragma once

#include <iosfwd>
#include <string>

#include "lqglab/field.hpp"

namespace lqglab {

// Flat binary layout, little-endian, version 1:
//   char[4] "LQGF" | u32 version | u32 shape | u32 nx | u32 ny | u32 R | u32 r
//   | u32 boundary | f64 mesh | f64 origin.x | f64 origin.y
//   | f64 values[ny][nx]   (row-major, row j = y index)
inline constexpr std::uint32_t kFieldFormatVersion = 1;

void write_field_binary(std::ostream& out, const Field& field);
Field read_field_binary(std::istream& in);
void save_field(const std::string& path, const Field& field);
Field load_field(const std::string& path);

/// Debug CSV: header "i,j,x,y,value", one row per grid cell.
void write_field_csv(std::ostream& out, const Field& field);

}  // namespace lqglab
