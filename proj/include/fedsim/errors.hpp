#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

/// Base class for all simulator errors.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Population / schedule validation.
class WeightSumError : public SimError {
public:
    using SimError::SimError;
};
class DuplicateId : public SimError {
public:
    using SimError::SimError;
};
class BadSchedule : public SimError {
public:
    using SimError::SimError;
};

// Local solver.
class NonContractive : public SimError {
public:
    using SimError::SimError;
};
class NumericalBlowup : public SimError {
public:
    using SimError::SimError;
};

// Sampling.
class DegenerateLink : public SimError {
public:
    using SimError::SimError;
};
class AllZeroGradients : public SimError {
public:
    using SimError::SimError;
};

// Analysis.
class InfeasibleDesign : public SimError {
public:
    using SimError::SimError;
};
class WrongShape : public SimError {
public:
    using SimError::SimError;
};

// Configuration and I/O.
class ConfigError : public SimError {
public:
    using SimError::SimError;
};
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};
class ValidationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};
class UnknownPreset : public ConfigError {
public:
    using ConfigError::ConfigError;
};
class IoError : public SimError {
public:
    using SimError::SimError;
};

}  // namespace fedsim
