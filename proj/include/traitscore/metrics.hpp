#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace traitscore {

// Inputs whose chance-agreement denominator (or variance) vanishes. Callers
// that aggregate run-level metrics treat this as a flagged run, never as a
// silent zero.
class degenerate_input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The ordered 0.5-step label grid [lo, lo+0.5, ..., hi].
struct GridSpec {
  double lo = 1.0;
  double hi = 5.0;

  int categories() const;
  // Exact integer category index round(2*(v - lo)); throws if v is off-grid.
  int index_of(double v) const;
  bool contains(double v) const;
};

// True iff v is a multiple of 0.5 (exactly, in doubles).
bool on_half_grid(double v);

// Nearest 0.5 multiple; exact .25/.75 midpoints round toward +inf.
double snap_half_up(double v);

// Quadratic weighted kappa over the grid. Throws degenerate_input_error when
// both marginals concentrate on a single shared category.
double qwk(std::span<const double> truth, std::span<const double> pred,
           const GridSpec& grid);

// Sample Pearson correlation; throws degenerate_input_error on constant input.
double pearson(std::span<const double> x, std::span<const double> y);

// Pearson on average ranks (ties share the mean rank).
double spearman(std::span<const double> x, std::span<const double> y);

// Average ranks, 1-based; tied values receive the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

}  // namespace traitscore
