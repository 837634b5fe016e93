// Copyright 2026 The dgnet Authors.
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

#include <atomic>
#include <cstdlib>
#include <string>

#include "dgnet/error.hpp"
#include "dgnet/kernels.hpp"

#if defined(DGNET_HAVE_AVX2)
#include "avx2_table.hpp"
#endif

namespace dgnet::kernels {
namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("DGNET_KERNELS"); env && *env) {
    return &table_for(parse_isa(env));
  }
  return cpu_supports(Isa::kAvx2) ? avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Isa::kScalar, "scalar", &scalar::gemm, &scalar::dot,
                             &scalar::squared_distance, &scalar::axpy};
  return t;
}

const KernelTable* avx2_table() {
#if defined(DGNET_HAVE_AVX2)
  return &avx2::table();
#else
  return nullptr;
#endif
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(DGNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!cpu_supports(isa)) {
    throw ConfigError("kernel set '" +
                      std::string(isa == Isa::kAvx2 ? "avx2" : "scalar") +
                      "' is not supported on this machine");
  }
  return isa == Isa::kAvx2 ? *avx2_table() : scalar_table();
}

const KernelTable& active() {
  return *current().load(std::memory_order_acquire);
}

void select(Isa isa) { current().store(&table_for(isa), std::memory_order_release); }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  throw ConfigError("unknown kernel set '" + std::string(name) +
                    "' (expected scalar or avx2)");
}

}  // namespace dgnet::kernels
