#include "dizi/score.hpp"

#include <stdexcept>

namespace dizi {

const char* school_name(School s) {
    switch (s) {
    case School::North: return "North";
    case School::South: return "South";
    default: return "Other";
    }
}

std::optional<School> school_from_name(const std::string& name) {
    std::string lower;
    for (char c : name)
        lower += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    if (lower == "north")
        return School::North;
    if (lower == "south")
        return School::South;
    if (lower == "other")
        return School::Other;
    return std::nullopt;
}

TechniqueRegistry::TechniqueRegistry() {
    entries_ = {
        {"none", "None"},
        {"tk", "Tonguing"},
        {"ft", "FlutterTonguing"},
        {"tr", "Trill"},
        {"ua", "UpperAcciaccatura"},
        {"la", "LowerAcciaccatura"},
        {"po", "Portamento"},
        {"br", "Breath"},
    };
}

const TechniqueRegistry& TechniqueRegistry::builtin() {
    static const TechniqueRegistry reg;
    return reg;
}

void TechniqueRegistry::register_technique(const std::string& code, const std::string& name) {
    if (code.empty())
        throw std::invalid_argument("technique code must be non-empty");
    for (char c : code)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
            throw std::invalid_argument("technique code '" + code + "' must be [a-z0-9_]+");
    if (has(code))
        throw std::invalid_argument("technique code '" + code + "' already registered");
    entries_.push_back({code, name});
}

bool TechniqueRegistry::has(const std::string& code) const { return index_of(code) >= 0; }

int TechniqueRegistry::index_of(const std::string& code) const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].code == code)
            return static_cast<int>(i);
    return -1;
}

std::vector<std::string> TechniqueRegistry::codes() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_)
        out.push_back(e.code);
    return out;
}

bool duration_denominator_supported(const Rational& d) {
    switch (d.den) {
    case 1: case 2: case 3: case 4: case 6: case 8: case 12: case 16:
        return d.num > 0;
    default:
        return false;
    }
}

} // namespace dizi
