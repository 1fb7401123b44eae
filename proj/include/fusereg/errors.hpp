#pragma once

#include <stdexcept>
#include <string>

namespace fusereg {

// Base classes map onto process exit codes: input errors -> 2,
// convergence failures -> 1, anything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

class UnknownLevel : public InputError {
 public:
  UnknownLevel(const std::string& predictor, const std::string& value)
      : InputError("unknown level '" + value + "' for predictor '" + predictor + "'"),
        predictor(predictor), value(value) {}
  std::string predictor;
  std::string value;
};

class EmptyColumn : public InputError {
 public:
  EmptyColumn(int factor, int level)
      : InputError("level column (" + std::to_string(factor) + "," + std::to_string(level) +
                   ") never occurs in the data (zero norm)"),
        factor(factor), level(level) {}
  int factor;
  int level;
};

class NonNumericResponse : public InputError {
 public:
  explicit NonNumericResponse(const std::string& cell)
      : InputError("response cell is not numeric: '" + cell + "'") {}
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class RankDeficient : public Error {
 public:
  RankDeficient(int size, int rank)
      : Error("collapsed design is rank deficient: size " + std::to_string(size) +
              ", rank " + std::to_string(rank)),
        size(size), rank(rank) {}
  int size;
  int rank;
};

class Overparameterized : public Error {
 public:
  Overparameterized(int size, int n)
      : Error("model size " + std::to_string(size) + " exceeds sample size " + std::to_string(n)),
        size(size), n(n) {}
  int size;
  int n;
};

class NotScreened : public InputError {
 public:
  explicit NotScreened(int factor)
      : InputError("factor " + std::to_string(factor) + " is not in the active set"),
        factor(factor) {}
  int factor;
};

class Exploded : public Error {
 public:
  Exploded(double count, long long max_count)
      : Error("submodel count " + std::to_string(count) + " exceeds limit " +
              std::to_string(max_count)) {}
};

class AllInfeasible : public Error {
 public:
  using Error::Error;
};

class UnseenLevel : public InputError {
 public:
  UnseenLevel(const std::string& column, const std::string& value)
      : InputError("unseen level '" + value + "' in column '" + column + "'"),
        column(column), value(value) {}
  std::string column;
  std::string value;
};

class Overflow : public Error {
 public:
  using Error::Error;
};

}  // namespace fusereg
