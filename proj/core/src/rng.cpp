#include "sgqa/rng.hpp"

#include <cmath>

#include "sgqa/errors.hpp"

namespace sgqa {

uint64_t fnv1a(std::string_view bytes, uint64_t basis) {
    uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((base >> (8 * i)) & 0xff);
    }
    uint64_t h = fnv1a(std::string_view(buf, 8));
    h = fnv1a(tag, h);
    // splitmix-style finalizer so nearby bases land far apart
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::string ParseError::format(ParseErrorKind kind, int line, int column,
                               const std::string& detail) {
    const char* name = "syntax error";
    switch (kind) {
        case ParseErrorKind::Syntax: name = "syntax error"; break;
        case ParseErrorKind::UnknownOperation: name = "unknown operation"; break;
        case ParseErrorKind::ArityMismatch: name = "arity mismatch"; break;
        case ParseErrorKind::MalformedSemantic: name = "malformed semantic"; break;
    }
    std::string msg = name;
    if (line > 0) {
        msg += " at line " + std::to_string(line);
        if (column > 0) msg += ", column " + std::to_string(column);
    }
    if (!detail.empty()) {
        msg += ": " + detail;
    }
    return msg;
}

}  // namespace sgqa
