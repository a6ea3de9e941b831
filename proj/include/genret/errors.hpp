#pragma once

#include <stdexcept>
#include <string>

namespace genret {

// Base of every error raised by the engine. Callers that only need a
// diagnostic can catch this; the subclasses exist so tests and the CLI can
// tell failure modes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDocument : public Error {
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConflictError : public Error {
  using Error::Error;
};

class NotFound : public Error {
  using Error::Error;
};

class InvalidToken : public Error {
  using Error::Error;
};

class InvalidArgument : public Error {
  using Error::Error;
};

class TrieBuildError : public Error {
  using Error::Error;
};

class InvalidPrefix : public Error {
  using Error::Error;
};

class MalformedSequence : public Error {
  using Error::Error;
};

class DeadEnd : public Error {
  using Error::Error;
};

class UndefinedMetric : public Error {
  using Error::Error;
};

// Remote scorer failures. Unreachable endpoints surface as RemoteTimeout.
class RemoteError : public Error {
  using Error::Error;
};

class RemoteTimeout : public RemoteError {
  using RemoteError::RemoteError;
};

class RemoteMalformedResponse : public RemoteError {
  using RemoteError::RemoteError;
};

class RemoteVocabularyMismatch : public RemoteError {
  using RemoteError::RemoteError;
};

}  // namespace genret
