#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfrl {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Warnings go to stderr so artifact files stay deterministic.
void warn(const std::string& msg);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace vfrl
