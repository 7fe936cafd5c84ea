// SPDX-License-Identifier: Apache-2.0
//
// cesim: constant-envelope multi-user MIMO downlink precoding simulator
// Copyright (C) 2026 The cesim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CESIM_CESIM_HPP
#define CESIM_CESIM_HPP

#include "channel.hpp"
#include "experiment.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rate.hpp"
#include "solver.hpp"

#endif
