/* Copyright 2026 The Cadet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CADET_ERROR_HPP_
#define CADET_ERROR_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace cadet {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// require(cond, "image ", id, ": bbox width must be positive")
template <typename... Parts>
void require(bool cond, Parts&&... parts) {
  if (cond) return;
  std::ostringstream os;
  (os << ... << parts);
  throw Error(os.str());
}

}  // namespace cadet

#endif  // CADET_ERROR_HPP_
