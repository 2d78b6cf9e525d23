#pragma once

#include <gtest/gtest.h>

#include "mizaj/error.hpp"

namespace testgen {

// Runs f and returns the code of the mizaj::Error it throws.
template <class F>
mizaj::Errc code_of(F&& f) {
  try {
    f();
  } catch (const mizaj::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mizaj::Error thrown";
  return mizaj::Errc::ParseError;
}

}  // namespace testgen
