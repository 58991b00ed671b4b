#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotJointlyObservable : public Error {
 public:
  using Error::Error;
};

/// A rank decision fell inside the singular-value gap guard band.
class NumericalRankAmbiguity : public Error {
 public:
  using Error::Error;
};

class InfeasibleChain : public Error {
 public:
  using Error::Error;
};

class PlacementFailed : public Error {
 public:
  using Error::Error;
};

class HorizonInconclusive : public Error {
 public:
  using Error::Error;
};

class HorizonTooShort : public Error {
 public:
  using Error::Error;
};

class OutOfHorizon : public Error {
 public:
  using Error::Error;
};

class SubsetBlowup : public Error {
 public:
  using Error::Error;
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

class MalformedBroadcast : public Error {
 public:
  using Error::Error;
};

/// Scenario or input file failed validation. Always raised before a run starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace aoi
