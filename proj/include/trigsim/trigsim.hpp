// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "trigsim/error.hpp"
#include "trigsim/intensity.hpp"
#include "trigsim/kitti.hpp"
#include "trigsim/materials.hpp"
#include "trigsim/optics.hpp"
#include "trigsim/poison.hpp"
#include "trigsim/rng.hpp"
#include "trigsim/trigger.hpp"
#include "trigsim/version.hpp"
