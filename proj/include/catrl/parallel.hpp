/*
* Copyright 2026 The catrl Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/

#ifndef CATRL_PARALLEL_HPP_
#define CATRL_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace catrl {

// Process-wide worker cap. Defaults to CATRL_THREADS when set, otherwise the
// number of logical cores.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work is distributed over up to thread_count()
// threads; calls made from inside a worker run serially. Results must be
// written to index-addressed slots so output never depends on scheduling. If
// any call throws, the exception from the lowest index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace catrl

#endif  // CATRL_PARALLEL_HPP_
