#pragma once

#include <stdexcept>
#include <string>

namespace cloop {

// Raised for contract violations on inputs (bad files, invalid graphs, ...).
class Error : public std::runtime_error
{
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cloop
