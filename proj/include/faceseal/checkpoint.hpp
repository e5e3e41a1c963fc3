#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "faceseal/tensor.hpp"

namespace faceseal {

// Versioned key->tensor archive plus a string metadata section. One file
// carries network params, the secret template, detector params, optimizer
// state and the config fingerprint. Keys are documented in the README.
// Little-endian; layout:
//   "FSEALCK1" | u32 version | u32 n_tensors | u32 n_meta
//   tensors: u32 klen, key, u8 ndim, i32 dims[ndim], f32 data[numel]
//   meta:    u32 klen, key, u64 vlen, bytes
struct Checkpoint {
    static constexpr char kMagic[9] = "FSEALCK1";
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> meta;

    void save(const std::filesystem::path& path) const {
        namespace fs = std::filesystem;
        fs::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
            out.write(kMagic, 8);
            write_u32(out, kVersion);
            write_u32(out, std::uint32_t(tensors.size()));
            write_u32(out, std::uint32_t(meta.size()));
            for (const auto& [key, t] : tensors) {
                write_str(out, key);
                const std::uint8_t nd = std::uint8_t(t.ndim());
                out.write(reinterpret_cast<const char*>(&nd), 1);
                for (int d : t.shape) write_i32(out, d);
                out.write(reinterpret_cast<const char*>(t.data.data()),
                          std::streamsize(t.data.size() * sizeof(float)));
            }
            for (const auto& [key, v] : meta) {
                write_str(out, key);
                const std::uint64_t len = v.size();
                out.write(reinterpret_cast<const char*>(&len), 8);
                out.write(v.data(), std::streamsize(v.size()));
            }
            if (!out) throw std::runtime_error("write failed: " + tmp.string());
        }
        fs::rename(tmp, path);  // atomic publish
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
        char magic[8];
        in.read(magic, 8);
        if (std::memcmp(magic, kMagic, 8) != 0)
            throw std::runtime_error("not a faceseal checkpoint: " + path.string());
        const std::uint32_t version = read_u32(in);
        if (version != kVersion)
            throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
        const std::uint32_t nt = read_u32(in), nm = read_u32(in);
        Checkpoint c;
        for (std::uint32_t i = 0; i < nt; ++i) {
            std::string key = read_str(in);
            std::uint8_t nd = 0;
            in.read(reinterpret_cast<char*>(&nd), 1);
            std::vector<int> shape(nd);
            for (auto& d : shape) d = read_i32(in);
            Tensor t(shape);
            in.read(reinterpret_cast<char*>(t.data.data()),
                    std::streamsize(t.data.size() * sizeof(float)));
            c.tensors.emplace(std::move(key), std::move(t));
        }
        for (std::uint32_t i = 0; i < nm; ++i) {
            std::string key = read_str(in);
            std::uint64_t len = 0;
            in.read(reinterpret_cast<char*>(&len), 8);
            std::string v(len, '\0');
            in.read(v.data(), std::streamsize(len));
            c.meta.emplace(std::move(key), std::move(v));
        }
        if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
        return c;
    }

    const Tensor& tensor(const std::string& key) const {
        auto it = tensors.find(key);
        if (it == tensors.end()) throw std::runtime_error("checkpoint missing tensor: " + key);
        return it->second;
    }

    std::string meta_or(const std::string& key, const std::string& fallback) const {
        auto it = meta.find(key);
        return it == meta.end() ? fallback : it->second;
    }

private:
    static void write_u32(std::ostream& o, std::uint32_t v) {
        o.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_i32(std::ostream& o, std::int32_t v) {
        o.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_str(std::ostream& o, const std::string& s) {
        write_u32(o, std::uint32_t(s.size()));
        o.write(s.data(), std::streamsize(s.size()));
    }
    static std::uint32_t read_u32(std::istream& i) {
        std::uint32_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::int32_t read_i32(std::istream& i) {
        std::int32_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::string read_str(std::istream& i) {
        const std::uint32_t n = read_u32(i);
        std::string s(n, '\0');
        i.read(s.data(), n);
        return s;
    }
};

}  // namespace faceseal
