#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bilbt {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = MatX<double>;
using Vecd = VecX<double>;
using Index = Eigen::Index;

// Error taxonomy shared by every module. All failures derive from Error so a
// caller can catch the library as a whole; parse failures carry a location.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimMismatch : Error { using Error::Error; };
struct NotStable : Error { using Error::Error; };
struct NotMSStable : Error { using Error::Error; };
struct SolveFailed : Error { using Error::Error; };
struct NotPSD : Error { using Error::Error; };
struct NotMinimal : Error { using Error::Error; };
struct BadOrder : Error { using Error::Error; };
struct DegenerateCut : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct SingularResolvent : Error { using Error::Error; };
struct NotInvariant : Error { using Error::Error; };
struct NotReachable : Error { using Error::Error; };
struct MissingCertificate : Error { using Error::Error; };

struct ParseError : Error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& what, int line_, int column_ = 0)
      : Error("line " + std::to_string(line_) + ": " + what),
        line(line_),
        column(column_) {}
};

}  // namespace bilbt
