/**
 * Copyright 2026 The boxald Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace boxald {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or inconsistent inputs detected before a run starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Ledger / pool bookkeeping was asked to do something that must never happen,
// e.g. reveal the same ground-truth box twice.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class SnapshotError : public Error {
 public:
  using Error::Error;
};

}  // namespace boxald
