#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srphist {

enum class Errc {
    not_bisectable,
    dimension_mismatch,
    empty_input,
    invalid_argument,
    root_has_no_parent,
    not_a_leaf,
    not_a_cherry,
    point_outside_root_box,
    empty_sample,
    invalid_tau,
    empty_candidate_set,
    insufficient_data,
    depth_exhausted,
    io_error,
    parse_error,
    unknown_reference,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::not_bisectable: return "NotBisectable";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::empty_input: return "EmptyInput";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::root_has_no_parent: return "RootHasNoParent";
        case Errc::not_a_leaf: return "NotALeaf";
        case Errc::not_a_cherry: return "NotACherry";
        case Errc::point_outside_root_box: return "PointOutsideRootBox";
        case Errc::empty_sample: return "EmptySample";
        case Errc::invalid_tau: return "InvalidTau";
        case Errc::empty_candidate_set: return "EmptyCandidateSet";
        case Errc::insufficient_data: return "InsufficientData";
        case Errc::depth_exhausted: return "DepthExhausted";
        case Errc::io_error: return "IoError";
        case Errc::parse_error: return "ParseError";
        case Errc::unknown_reference: return "UnknownReference";
    }
    return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace srphist
