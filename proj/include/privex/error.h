//
// Copyright 2026 The Privex Authors
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
//

#ifndef PRIVEX_ERROR_H_
#define PRIVEX_ERROR_H_

#include <stdexcept>
#include <string>

namespace privex {

// Malformed or unreadable input data (manifests, images, checkpoints).
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration key/value. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An upstream artifact required by a command does not exist. Exit code 3.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced non-finite values. Exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace privex

#endif  // PRIVEX_ERROR_H_
