#pragma once

namespace stormlog::normal {

// Complementary error function, rational Chebyshev approximation (W. J. Cody,
// Math. Comp. 1969). Relative error near double precision for |x| < 26.5;
// returns 0 beyond.
double erfc(double x);

// P(|Z| >= z) for a standard normal Z; z is taken by absolute value.
double two_sided_tail(double z);

}  // namespace stormlog::normal
