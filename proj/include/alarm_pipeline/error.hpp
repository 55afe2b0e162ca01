#pragma once

#include <stdexcept>
#include <string>

namespace alarm_pipeline {

/// Malformed input file or record. The message names the offending line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that are individually valid but inconsistent with each other.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// No admissible solution exists (fold packing, synthetic layout, constrained tuning).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace alarm_pipeline
