// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace trigsim {

inline constexpr const char* kToolName = "trigsim";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace trigsim
