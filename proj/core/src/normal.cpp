#include "stormlog/normal.hpp"

#include <cmath>

namespace stormlog::normal {
namespace {

constexpr double kA[5] = {3.1611237438705656, 113.864154151050156, 377.485237685302021,
                          3209.37758913846947, 0.185777706184603153};
constexpr double kB[4] = {23.6012909523441209, 244.024637934444173, 1282.61652607737228,
                          2844.23683343917062};
constexpr double kC[9] = {0.564188496988670089, 8.88314979438837594, 66.1191906371416295,
                          298.635138197400131,  881.95222124176909,  1712.04761263407058,
                          2051.07837782607147,  1230.33935479799725, 2.15311535474403846e-8};
constexpr double kD[8] = {15.7449261107098347, 117.693950891312499, 537.181101862009858,
                          1621.38957456669019, 3290.79923573345963, 4362.61909014324716,
                          3439.36767414372164, 1230.33935480374942};
constexpr double kP[6] = {0.305326634961232344, 0.360344899949804439, 0.125781726111229246,
                          0.0160837851487422766, 6.58749161529837803e-4, 0.0163153871373020978};
constexpr double kQ[5] = {2.56852019228982242, 1.87295284992346047, 0.527905102951428412,
                          0.0605183413124413191, 0.00233520497626869185};

constexpr double kSqrtPiInv = 0.56418958354775628695;
constexpr double kThreshold = 0.46875;
constexpr double kSmall = 1.11e-16;
constexpr double kBig = 26.543;

// exp(-y*y) split so the large part is exact: y*y = s*s + (y-s)(y+s).
double scaled_exp(double y) {
  double s = std::trunc(y * 16.0) / 16.0;
  double del = (y - s) * (y + s);
  return std::exp(-s * s) * std::exp(-del);
}

}  // namespace

double erfc(double x) {
  if (std::isnan(x)) return x;
  const double y = std::fabs(x);
  double result;
  if (y <= kThreshold) {
    double ysq = y > kSmall ? y * y : 0.0;
    double num = kA[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
      num = (num + kA[i]) * ysq;
      den = (den + kB[i]) * ysq;
    }
    return 1.0 - x * (num + kA[3]) / (den + kB[3]);
  }
  if (y <= 4.0) {
    double num = kC[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + kC[i]) * y;
      den = (den + kD[i]) * y;
    }
    result = scaled_exp(y) * (num + kC[7]) / (den + kD[7]);
  } else if (y >= kBig) {
    result = 0.0;
  } else {
    double ysq = 1.0 / (y * y);
    double num = kP[5] * ysq;
    double den = ysq;
    for (int i = 0; i < 4; ++i) {
      num = (num + kP[i]) * ysq;
      den = (den + kQ[i]) * ysq;
    }
    double r = ysq * (num + kP[4]) / (den + kQ[4]);
    result = scaled_exp(y) * (kSqrtPiInv - r) / y;
  }
  return x < 0 ? 2.0 - result : result;
}

double two_sided_tail(double z) {
  return erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace stormlog::normal
