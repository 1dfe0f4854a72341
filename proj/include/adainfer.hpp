// Copyright 2026 The AdaInfer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Umbrella header.

#include "adainfer/classifiers/crf.hpp"
#include "adainfer/classifiers/decider.hpp"
#include "adainfer/classifiers/gap_rule.hpp"
#include "adainfer/classifiers/model_io.hpp"
#include "adainfer/classifiers/svm.hpp"
#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/core/parallel.hpp"
#include "adainfer/core/rng.hpp"
#include "adainfer/cost/cost_model.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/labels.hpp"
#include "adainfer/features/trace.hpp"
#include "adainfer/features/trajectory.hpp"
#include "adainfer/harness/config.hpp"
#include "adainfer/harness/eval.hpp"
#include "adainfer/harness/prompt.hpp"
#include "adainfer/harness/report.hpp"
#include "adainfer/harness/synth.hpp"
#include "adainfer/model/corpus.hpp"
#include "adainfer/model/forward.hpp"
#include "adainfer/model/model.hpp"
#include "adainfer/model/sweep.hpp"
#include "adainfer/model/train.hpp"
#include "adainfer/runtime/adaptive.hpp"
