#pragma once

#include <stdexcept>
#include <string>

namespace balgraph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IsolatedNode : public Error {
 public:
  explicit IsolatedNode(int node)
      : Error("node " + std::to_string(node) + " has zero absolute degree"), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

class NotBalanced : public Error {
 public:
  using Error::Error;
};

class MissingDistance : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int index) : Error(what), index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class DivergedLoss : public Error {
 public:
  DivergedLoss(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace balgraph
