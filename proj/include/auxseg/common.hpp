#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace auxseg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an input file cannot be parsed or is inconsistent.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Raised when argument shapes or values violate an operation's contract.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Grid extent in voxels (x, y, z). Linear index is x-fastest.
struct Extent3 {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr int& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  constexpr std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  constexpr std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(x) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(y) * static_cast<std::size_t>(k));
  }
  constexpr bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
  }
  friend constexpr bool operator==(const Extent3&, const Extent3&) = default;
};

std::string to_string(const Extent3& e);

using Vec3 = std::array<double, 3>;

}  // namespace auxseg
