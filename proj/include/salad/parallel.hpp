// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace salad {

// SALAD_THREADS if set to a positive integer, else the hardware concurrency.
std::size_t worker_count();

// Runs fn(0) .. fn(n - 1) on up to `threads` threads. The first exception
// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace salad
