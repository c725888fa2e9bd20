// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ura/common.hpp"

#include <gtest/gtest.h>

// Asserts that `stmt` throws ura::Error of the given kind.
#define EXPECT_URA_ERROR(stmt, expected_kind)                                                   \
  do {                                                                                          \
    try {                                                                                       \
      stmt;                                                                                     \
      ADD_FAILURE() << "no exception from " #stmt;                                              \
    } catch (const ::ura::Error& e_) {                                                          \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                                         \
    } catch (const std::exception& e_) {                                                        \
      ADD_FAILURE() << "unexpected exception type: " << e_.what();                              \
    }                                                                                           \
  } while (0)
