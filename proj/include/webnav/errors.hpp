#ifndef WEBNAV_ERRORS_HPP
#define WEBNAV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace webnav {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A required file or directory does not exist.
class MissingFileError : public Error {
public:
    using Error::Error;
};

// Input violates an on-disk schema (malformed json, wrong field types,
// duplicate turn indices, bad attribute lists, ...). Loading is fatal on
// these; semantic problems are reported through validate_demonstration
// instead.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A turn state references an asset file that is not on disk.
class DanglingAssetError : public Error {
public:
    using Error::Error;
};

class DuplicateUidError : public Error {
public:
    using Error::Error;
};

class UnknownUidError : public Error {
public:
    using Error::Error;
};

class NoElementAtPointError : public Error {
public:
    using Error::Error;
};

class NoParsableActionError : public Error {
public:
    using Error::Error;
};

class MissingBBoxError : public Error {
public:
    using Error::Error;
};

// Training data that cannot be fit (e.g. all labels identical).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

} // namespace webnav

#endif
