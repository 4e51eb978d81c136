#pragma once

#include <stdexcept>
#include <string>

namespace layerlens {

// Dimension mismatch in a numeric kernel call.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Out-of-domain argument: bad token id, k > T, layer index past the end, ...
struct input_error : std::runtime_error {
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem trouble or a malformed on-disk artifact.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// A specific line or field of a text input failed to parse.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace layerlens
