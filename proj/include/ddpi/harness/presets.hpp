#pragma once

// Parameter sets of the two published simulation studies.

#include "ddpi/lqr.hpp"

namespace ddpi::harness::presets {

/// Slightly unstable 3x3 plant with B = I.
inline Plant paper_5_1_plant() {
  Mat a(3, 3);
  a << 1.01, 0.01, 0.00,
       0.01, 1.01, 0.01,
       0.00, 0.01, 1.01;
  return Plant(a, Mat::Identity(3, 3));
}

inline CostWeights paper_5_1_weights() {
  return CostWeights(0.001 * Mat::Identity(3, 3), Mat::Identity(3, 3));
}

inline constexpr double kPaper51Offset = 0.5;  // Â0 = A + 0.5 I, B̂0 = B + 0.5 I
inline constexpr double kPaper51H0 = 0.1;
inline constexpr double kPaper51Dither = 10.0;

inline Plant paper_5_2_plant() {
  Mat a(3, 3);
  a << -0.53,  0.42, -0.44,
        0.42, -0.56, -0.65,
       -0.44, -0.65,  0.35;
  Mat b(3, 2);
  b << 0.43, -0.82,
       0.53, -0.78,
       0.26, -0.40;
  return Plant(a, b);
}

inline CostWeights paper_5_2_weights() {
  Mat q(3, 3);
  q << 6.12, 1.72, 0.53,
       1.72, 6.86, 1.72,
       0.53, 1.72, 5.73;
  Mat r(2, 2);
  r <<  1.15, -0.23,
       -0.23,  3.62;
  return CostWeights(q, r);
}

inline constexpr double kPaper52AFactor = 1.3;  // Â0 = 1.3 A
inline constexpr double kPaper52BFactor = 0.7;  // B̂0 = 0.7 B
inline constexpr double kPaper52H0 = 0.01;
inline constexpr double kPaper52Dither = 10.0;
inline constexpr double kPaper52Stepsize = 0.005;

}  // namespace ddpi::harness::presets
