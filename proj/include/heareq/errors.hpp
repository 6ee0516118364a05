#pragma once

#include <stdexcept>
#include <string>

namespace heareq {

// Error hierarchy mirrored by the CLI exit codes: ConfigError -> 2,
// DataError (and subclasses) -> 3, NumericalError (and subclasses) -> 4.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Mismatched lengths, grids, or transform sizes.
class DimensionError : public DataError {
public:
  explicit DimensionError(const std::string& msg) : DataError(msg) {}
};

// Malformed files; carries file and line context in the message.
class SchemaError : public DataError {
public:
  explicit SchemaError(const std::string& msg) : DataError(msg) {}
};

// Misuse of an evaluation protocol, e.g. a held-out subject found in
// the training set.
class ContractError : public DataError {
public:
  explicit ContractError(const std::string& msg) : DataError(msg) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

class SingularityError : public NumericalError {
public:
  explicit SingularityError(const std::string& msg) : NumericalError(msg) {}
};

// A value that must be structurally true of the data was violated,
// e.g. a non-real DC bin in a spectrum claimed to be real-valued.
class InvariantError : public DataError {
public:
  explicit InvariantError(const std::string& msg) : DataError(msg) {}
};

}  // namespace heareq
