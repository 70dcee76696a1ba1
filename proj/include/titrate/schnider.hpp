#pragma once

// Schnider et al. (1998) propofol population PK model.
// Volumes in L, clearances in L/min. Covariates are centered on the reference
// individual (53 yr, 77 kg, 177 cm, LBM 59 kg).
//
// Constants version: schnider-1998-v1

namespace titrate::schnider {

inline constexpr const char* kVersion = "schnider-1998-v1";

inline constexpr double kRefAge = 53.0;
inline constexpr double kRefWeight = 77.0;
inline constexpr double kRefHeight = 177.0;
inline constexpr double kRefLeanBodyMass = 59.0;

inline constexpr double kV1 = 4.27;
inline constexpr double kV2 = 18.9;
inline constexpr double kV2AgeSlope = -0.391;
inline constexpr double kV3 = 238.0;

inline constexpr double kCl1 = 1.89;
inline constexpr double kCl1WeightSlope = 0.0456;
inline constexpr double kCl1LeanBodyMassSlope = -0.0681;
inline constexpr double kCl1HeightSlope = 0.0264;
inline constexpr double kCl2 = 1.29;
inline constexpr double kCl2AgeSlope = -0.024;
inline constexpr double kCl3 = 0.836;

// James lean body mass, kg.
inline constexpr double kLbmMaleWeight = 1.1;
inline constexpr double kLbmMaleRatio = 128.0;
inline constexpr double kLbmFemaleWeight = 1.07;
inline constexpr double kLbmFemaleRatio = 148.0;

}  // namespace titrate::schnider
