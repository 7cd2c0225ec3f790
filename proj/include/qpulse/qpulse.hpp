// Copyright 2026 The qpulse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qpulse/analyze.hpp"
#include "qpulse/cascade.hpp"
#include "qpulse/config.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/evolve.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/io.hpp"
#include "qpulse/oracle.hpp"
#include "qpulse/pulses.hpp"
#include "qpulse/regression.hpp"
#include "qpulse/scenario.hpp"
