#ifndef APSIM_CRC32_HPP
#define APSIM_CRC32_HPP

#include <array>
#include <cstdint>
#include <cstddef>

namespace apsim {

// CRC-32 as used by the 802.11 FCS: reflected IEEE polynomial 0xEDB88320,
// init 0xFFFFFFFF, final xor 0xFFFFFFFF. crc32("123456789") == 0xCBF43926.
class Crc32 {
public:
    static std::uint32_t of(const std::uint8_t* data, std::size_t len) {
        std::uint32_t crc = 0xFFFFFFFFu;
        for (std::size_t i = 0; i < len; ++i)
            crc = (crc >> 8) ^ table()[(crc ^ data[i]) & 0xff];
        return crc ^ 0xFFFFFFFFu;
    }

    template <typename Container>
    static std::uint32_t of(const Container& c, std::size_t first = 0, std::size_t count = SIZE_MAX) {
        std::size_t n = c.size() > first ? c.size() - first : 0;
        if (count < n) n = count;
        return of(c.data() + first, n);
    }

private:
    static const std::array<std::uint32_t, 256>& table() {
        static const std::array<std::uint32_t, 256> t = [] {
            std::array<std::uint32_t, 256> a{};
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int k = 0; k < 8; ++k)
                    c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
                a[i] = c;
            }
            return a;
        }();
        return t;
    }
};

} // namespace apsim

#endif
