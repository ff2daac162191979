/*
   Copyright 2026 The gsm2sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace gsm2 {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller violated an operation precondition (bad dimension, bad index).
class InputError : public Error {
public:
    using Error::Error;
};

/// A rate or response function produced a value outside its declared
/// envelope (negative, NaN, above cap).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A numerical scheme broke down (reflection did not converge, negativity,
/// truncation leak, population explosion). CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Stale or corrupt internal bookkeeping; indicates a bug.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace gsm2
