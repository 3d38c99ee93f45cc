#pragma once

// RQDM1 density-matrix snapshots.
//
// Layout: ASCII magic line "RQDM1", one line of space-separated factor
// descriptors ("rotor <l_min> <l_max>", "qubit", "oscillator <n_max>"),
// then dim^2 complex entries as little-endian IEEE-754 doubles,
// interleaved real/imaginary, row-major. Round trips are bit-exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rotoreng/qspace.hpp"

namespace rotoreng {

static_assert(sizeof(double) == 8, "RQDM1 assumes 64-bit doubles");

namespace detail {

inline bool host_is_little_endian()
{
    const uint16_t probe = 1;
    uint8_t byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

inline uint64_t byteswap64(uint64_t v)
{
    uint8_t b[8];
    std::memcpy(b, &v, 8);
    std::swap(b[0], b[7]);
    std::swap(b[1], b[6]);
    std::swap(b[2], b[5]);
    std::swap(b[3], b[4]);
    std::memcpy(&v, b, 8);
    return v;
}

inline void put_le_double(std::ostream& os, double d)
{
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    if (!host_is_little_endian()) bits = byteswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

inline double get_le_double(std::istream& is)
{
    uint64_t bits;
    is.read(reinterpret_cast<char*>(&bits), 8);
    if (!host_is_little_endian()) bits = byteswap64(bits);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

} // namespace detail

inline void save_state(const DensityMatrix& rho, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open '" + path + "' for writing");
    os << "RQDM1\n";
    bool first = true;
    for (const Factor& f : rho.layout.factors) {
        if (!first) os << ' ';
        first = false;
        switch (f.kind) {
            case FactorKind::Rotor: os << "rotor " << f.l_min << ' ' << f.l_max; break;
            case FactorKind::Qubit: os << "qubit"; break;
            case FactorKind::Oscillator: os << "oscillator " << f.n_max; break;
        }
    }
    os << '\n';
    const int dim = rho.layout.dim;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            detail::put_le_double(os, rho.data(i, j).real());
            detail::put_le_double(os, rho.data(i, j).imag());
        }
    if (!os) throw format_error("write to '" + path + "' failed");
}

inline DensityMatrix load_state(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open '" + path + "'");
    std::string magic, descriptor;
    if (!std::getline(is, magic) || magic != "RQDM1")
        throw format_error("'" + path + "' is not an RQDM1 file (magic mismatch)");
    if (!std::getline(is, descriptor))
        throw format_error("'" + path + "': missing factor descriptor line");

    std::istringstream ds(descriptor);
    std::vector<Factor> factors;
    std::string word;
    while (ds >> word) {
        if (word == "rotor") {
            int lo, hi;
            if (!(ds >> lo >> hi))
                throw format_error("'" + path + "': malformed rotor descriptor");
            factors.push_back(Factor::rotor(lo, hi));
        } else if (word == "qubit") {
            factors.push_back(Factor::qubit());
        } else if (word == "oscillator") {
            int n;
            if (!(ds >> n)) throw format_error("'" + path + "': malformed oscillator descriptor");
            factors.push_back(Factor::oscillator(n));
        } else {
            throw format_error("'" + path + "': unknown factor kind '" + word + "'");
        }
    }
    if (factors.empty()) throw format_error("'" + path + "': no factors declared");

    const SpaceLayout layout(factors);
    const int dim = layout.dim;
    Matrix data(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const double re = detail::get_le_double(is);
            const double im = detail::get_le_double(is);
            if (!is)
                throw format_error("'" + path + "': payload truncated (expected " +
                                   std::to_string(size_t(dim) * dim) + " complex entries)");
            data(i, j) = cplx(re, im);
        }
    char extra;
    if (is.read(&extra, 1))
        throw format_error("'" + path + "': trailing bytes after the declared payload");
    return DensityMatrix(layout, std::move(data));
}

} // namespace rotoreng
