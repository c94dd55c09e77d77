#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace factmatch {

/// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
  public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path_(std::move(path)), line_(line)
    {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string path_;
    std::size_t line_;
};

/// An input path that does not exist or cannot be opened.
class MissingFileError : public Error {
  public:
    explicit MissingFileError(std::string path)
        : Error("cannot open file: " + path), path_(std::move(path))
    {}
    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

class DuplicateIdError : public Error {
  public:
    explicit DuplicateIdError(std::string id)
        : Error("duplicate id: " + id), id_(std::move(id))
    {}
    const std::string& id() const noexcept { return id_; }

  private:
    std::string id_;
};

class UnknownIdError : public Error {
  public:
    using Error::Error;
};

class InvalidTransitionError : public Error {
  public:
    using Error::Error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Client-side refusal before any request is sent.
class PayloadTooLargeError : public InvalidArgument {
  public:
    using InvalidArgument::InvalidArgument;
};

class FormatVersionError : public Error {
  public:
    using Error::Error;
};

/// Network failure talking to a remote endpoint (after retries).
class TransportError : public Error {
  public:
    TransportError(std::string endpoint, const std::string& what)
        : Error(endpoint + ": " + what), endpoint_(std::move(endpoint))
    {}
    const std::string& endpoint() const noexcept { return endpoint_; }

  private:
    std::string endpoint_;
};

/// The remote side answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

/// The remote side reported a failure (non-2xx with an error body).
class ServerError : public Error {
  public:
    ServerError(int status, const std::string& message)
        : Error("server error " + std::to_string(status) + ": " + message), status_(status)
    {}
    int status() const noexcept { return status_; }

  private:
    int status_;
};

/// Failure inside one stage of a multi-stage computation (pipeline stage, CV fold, encoder batch).
class StageError : public Error {
  public:
    StageError(std::string stage, std::size_t index, const std::string& what)
        : Error(stage + "[" + std::to_string(index) + "]: " + what), stage_(std::move(stage)), index_(index)
    {}
    const std::string& stage() const noexcept { return stage_; }
    std::size_t index() const noexcept { return index_; }

  private:
    std::string stage_;
    std::size_t index_;
};

}  // namespace factmatch
