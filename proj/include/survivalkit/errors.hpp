#pragma once

#include <stdexcept>
#include <string>

namespace survivalkit {

// Base class for all survivalkit errors. Pure math preconditions
// (non-finite inputs, probabilities out of range) throw std::domain_error
// directly; everything tied to the artifact's surfaces derives from here.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems with user-supplied input: files, columns, rows, names, formulas.
// The CLI maps these to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class RowError : public InputError {
 public:
  using InputError::InputError;
};

class NameError : public InputError {
 public:
  using InputError::InputError;
};

class FormulaError : public InputError {
 public:
  using InputError::InputError;
};

class SampleSizeError : public InputError {
 public:
  using InputError::InputError;
};

// Numerical failures: non-convergence, degeneracy, rank deficiency,
// unsupported data/model combinations. The CLI maps these to exit code 2.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class CollinearityError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegeneracyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SupportError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace survivalkit
