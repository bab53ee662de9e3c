// Trajectory/ensemble serialization: CSV for spreadsheets and a compact
// binary frame for round-tripping sample clouds.
//
// Binary frame layout (little-endian): magic "WCLB" (4 bytes), uint32
// version (currently 1), uint64 n, uint64 d, then n*d IEEE-754 doubles in
// row-major order.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wclb/sim.hpp"

namespace wclb {

// Writes "header..." then one row per line; cells carry 17 significant
// digits so values round-trip exactly.
void write_matrix_csv(std::ostream& os, const Mat& m,
                      const std::vector<std::string>& header);

// Columns: step, x0..x{d-1}, y0..y{d-1}, distance, rho.
void write_trajectory_csv(std::ostream& os, const CoupledTrajectory& traj);

// Columns: step, row, c0..c{d-1}; one block per recorded measure.
void write_measures_csv(std::ostream& os, const std::vector<EmpiricalMeasure>& ms);

// Reads a numeric matrix back; a leading non-numeric row is treated as the
// header.  Throws std::runtime_error on ragged or non-numeric input.
Mat read_matrix_csv(std::istream& is);

void write_wclb_frame(std::ostream& os, const Mat& points);
Mat read_wclb_frame(std::istream& is); // throws std::runtime_error on bad input

} // namespace wclb
