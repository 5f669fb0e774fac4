#pragma once

#include <stdexcept>
#include <string>

namespace vmiv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (bad index, wrong dimensions, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Design matrix or moment Jacobian is rank deficient.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

// Estimated complier share too small, or too imprecise, to divide by.
class WeakIdentificationError : public Error {
 public:
  WeakIdentificationError(const std::string& what, double share, double t_stat)
      : Error(what), share_(share), t_stat_(t_stat) {}
  double share() const { return share_; }
  double t_stat() const { return t_stat_; }

 private:
  double share_;
  double t_stat_;
};

}  // namespace vmiv
