// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace sdist::log {

enum class Level { kQuiet, kWarn, kInfo };

void set_level(Level level);
Level level();
void warn(const std::string& msg);
void info(const std::string& msg);
/// Warnings emitted since process start (or the last reset).
std::size_t warning_count();
void reset_warning_count();

}  // namespace sdist::log
