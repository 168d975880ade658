// Copyright 2026 The reftrack Authors
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

#ifndef REFTRACK_PARALLEL_H_
#define REFTRACK_PARALLEL_H_

#include <functional>

namespace reftrack {

// Calls fn(i) for i in [0, n) on up to `threads` threads. Each index runs
// exactly once; callers write results into per-index slots so the outcome
// does not depend on scheduling. The first exception thrown by any call is
// rethrown after all threads have joined.
void ParallelFor(int n, int threads, const std::function<void(int)>& fn);

}  // namespace reftrack

#endif  // REFTRACK_PARALLEL_H_
