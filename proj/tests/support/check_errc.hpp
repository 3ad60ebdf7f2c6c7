#pragma once

#include "doctest.h"
#include "mixlab/error.hpp"

#define CHECK_ERRC(expr, errc)                                   \
  do {                                                           \
    bool mixlab_thrown_ = false;                                 \
    try {                                                        \
      (void)(expr);                                              \
    } catch (const ::mixlab::Error& mixlab_e_) {                 \
      mixlab_thrown_ = true;                                     \
      CHECK_MESSAGE(mixlab_e_.code() == (errc), mixlab_e_.what()); \
    }                                                            \
    CHECK_MESSAGE(mixlab_thrown_, "expected " #errc);            \
  } while (false)
