#pragma once

// Shared helpers for schema-checked JSON documents.

#include "cloop/error.hpp"

#include <json.hpp>

#include <cmath>
#include <exception>
#include <set>
#include <string>

namespace cloop::detail {

using nlohmann::json;

struct SchemaError
{
    std::string path;
    std::string reason;
};

[[noreturn]] inline void fail(const std::string& path, const std::string& reason)
{
    throw SchemaError{path, reason};
}

inline std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

inline std::string index(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

// Object reader that rejects keys nobody asked for.
class Fields
{
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j.is_object()) fail(path_, "expected an object");
    }

    ~Fields() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) fail(join(path_, k), "unknown field");
    }

    bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

    const json& required(const std::string& k)
    {
        used_.insert(k);
        if (!j_.contains(k)) fail(join(path_, k), "missing required field");
        return j_.at(k);
    }

    const json* optional(const std::string& k)
    {
        used_.insert(k);
        if (!j_.contains(k) || j_.at(k).is_null()) return nullptr;
        return &j_.at(k);
    }

    std::string path(const std::string& k) const { return join(path_, k); }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
}

inline int integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

inline std::string text(const json& j, const std::string& path)
{
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

inline const json& array(const json& j, const std::string& path)
{
    if (!j.is_array()) fail(path, "expected an array");
    return j;
}

inline double opt_number(Fields& f, const std::string& k, double fallback)
{
    const json* j = f.optional(k);
    return j ? number(*j, f.path(k)) : fallback;
}

/// "<source>:<line>: field '<path>': <reason>" with the line located in `text`.
std::string format_schema_error(const std::string& text, const std::string& source, const SchemaError& e);

} // namespace cloop::detail
