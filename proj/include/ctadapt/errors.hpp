#pragma once

#include <stdexcept>
#include <string>

namespace ctadapt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid tunable or usage; nothing has been written when this escapes a command.
class ConfigError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared; the message names the layer that produced it.
class NumericError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CorruptCheckpointError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class RecallUndefinedError : public Error {
public:
    using Error::Error;
};

class MultiplierUndefinedError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

}  // namespace ctadapt
