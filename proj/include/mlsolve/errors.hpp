#pragma once

#include <stdexcept>
#include <string>

namespace mlsolve {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A reciprocal node evaluated to zero (or to an interval containing zero).
class SingularEvaluation : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

/// Bad or mismatched data vectors and label sets.
class DataError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Start-system cache is missing, stale, or belongs to another model.
class CacheError : public Error {
public:
    using Error::Error;
};

class SolveError : public Error {
public:
    using Error::Error;
};

} // namespace mlsolve
