#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ebr {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IOFailure : public Error {
public:
    using Error::Error;
};

class SchemaViolation : public Error {
public:
    SchemaViolation(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class DuplicateProblemId : public Error {
public:
    explicit DuplicateProblemId(const std::string& id)
        : Error("duplicate problem id: " + id), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

class ParseFailure : public Error {
public:
    using Error::Error;
};

class NoSolution : public Error {
public:
    NoSolution() : Error("puzzle has no consistent assignment") {}
};

class MultipleSolutions : public Error {
public:
    explicit MultipleSolutions(std::size_t count)
        : Error("puzzle has " + std::to_string(count) + " consistent assignments"), count_(count) {}
    std::size_t count() const noexcept { return count_; }

private:
    std::size_t count_;
};

class MissingGreedyFlag : public Error {
public:
    using Error::Error;
};

class MissingLabels : public Error {
public:
    using Error::Error;
};

class EmptyReport : public Error {
public:
    EmptyReport() : Error("constraint report has no violated dimension") {}
};

class BackendFailure : public Error {
public:
    using Error::Error;
};

class RhoZero : public Error {
public:
    RhoZero() : Error("rho = 0: the ensemble ceiling is 1") {}
};

} // namespace ebr
