// Copyright 2026 The Patch Collapse Authors
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

#ifndef COLLAPSE_SEEDING_H_
#define COLLAPSE_SEEDING_H_

#include <cstdint>
#include <string_view>

namespace collapse {

// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t MixSeed(std::uint64_t x);

// 64-bit FNV-1a hash of a byte string.
std::uint64_t HashName(std::string_view name);

// Derives an independent stream seed from a parent seed and a stage label.
//
// The rule is MixSeed(parent ^ HashName(label)). Every stage of the pipeline
// ("build-field", "learn-masks", ...) owns one label, so changing the work
// done in one stage never perturbs the random streams of another.
std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view label);

// Same as above for integer-indexed sub-streams (per-epoch, per-target).
std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view label,
                         std::uint64_t index);

}  // namespace collapse

#endif  // COLLAPSE_SEEDING_H_
