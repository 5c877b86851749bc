// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace splat4d {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (negative depth, negative dt, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Array shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class AggregationError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

namespace io {

/// Base class for malformed or unreadable files.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Magic bytes do not match the expected format version.
class VersionError : public FormatError {
public:
    VersionError(const std::string& found, const std::string& expected)
        : FormatError("format version mismatch: found magic '" + found + "', expected '" + expected + "'"),
          found_(found), expected_(expected) {}

    const std::string& found() const { return found_; }
    const std::string& expected() const { return expected_; }

private:
    std::string found_;
    std::string expected_;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

class DimensionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Text input (trajectory, config) could not be parsed.
class ParseError : public FormatError {
public:
    using FormatError::FormatError;
};

class FileError : public Error {
public:
    using Error::Error;
};

}  // namespace io
}  // namespace splat4d
