#pragma once

#include <iosfwd>
#include <string>

#include "orliczfb/solver.hpp"

namespace orliczfb {

/// Writes u in the ORLICZFB 1 text format:
///
///     ORLICZFB 1
///     grid nx ny hx hy
///     <ny lines of nx values, row-major from y = 0>
///
/// Values use 17 significant digits, so reading the file back reproduces them exactly.
void write_field(std::ostream& out, const Field& u);
void write_field(const std::string& path, const Field& u);

/// Reads a field; the returned grid takes its boundary data from the boundary values.
/// One-dimensional fields have ny = 1 and hy = 0. Throws DomainError on a malformed
/// file, wrong value counts, or values that are negative or not finite.
Field read_field(std::istream& in);
Field read_field(const std::string& path);

}  // namespace orliczfb
