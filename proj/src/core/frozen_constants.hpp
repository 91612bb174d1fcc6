#pragma once

// Generated by tools/freeze_constants; regression constants derived by the
// Monte-Carlo quantization oracle (1e6 Haar samples per seed plus local
// ascent onto the deep hole). Do not edit by hand.

namespace i2i::frozen {

// Covering radius of I60: worst-case angle to the nearest element.
inline constexpr double kCoveringRadiusDeg = 44.4775;
// Median quantization angle of I60 under Haar sampling.
inline constexpr double kMedianQuantAngleDeg = 31.0705;
// Camera-facing submesh points of the standard 42-point plan.
inline constexpr int kVisibleCount42 = 25;

}  // namespace i2i::frozen
