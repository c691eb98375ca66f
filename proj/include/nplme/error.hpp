#pragma once

#include <stdexcept>
#include <string>

namespace nplme {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

class InvalidMeasure : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class UnsupportedPrior : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ChainFailure : public Error {
 public:
  ChainFailure(std::size_t chain, const std::string& what)
      : Error("chain " + std::to_string(chain) + ": " + what), chain_(chain) {}
  std::size_t chain() const noexcept { return chain_; }

 private:
  std::size_t chain_;
};

class SimexUnstable : public Error {
 public:
  SimexUnstable(double lambda, const std::string& what)
      : Error(what), lambda_(lambda) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

class MissingLatent : public Error {
 public:
  using Error::Error;
};

}  // namespace nplme
