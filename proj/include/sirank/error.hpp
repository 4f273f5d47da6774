/*
 * Copyright 2026 The sirank Authors.
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
 */
#ifndef SIRANK_ERROR_HPP_
#define SIRANK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sirank {

/// Single exception type thrown by the library on invalid input,
/// contract violations and transport failures.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sirank

#endif  // SIRANK_ERROR_HPP_
