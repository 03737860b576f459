#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwaser/util.hpp"

namespace mwaser::nn {

// Dense row-major n-dimensional array.
template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }

    size_t size() const { return data.size(); }
    size_t dim(size_t i) const { return shape.at(i); }

    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    Tensor reshaped(std::vector<size_t> s) const {
        if (count(s) != data.size()) throw std::invalid_argument("reshape: element count mismatch");
        Tensor out = *this;
        out.shape = std::move(s);
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

namespace detail {

// C[M,N] = A[M,K] * B[K,N]. Partitioned over output rows, so the result is
// identical for every thread count.
template <typename T>
void gemm(size_t M, size_t N, size_t K, const T* A, const T* B, T* C, unsigned threads) {
    auto rows = [&](size_t i) {
        T* c = C + i * N;
        for (size_t j = 0; j < N; ++j) c[j] = T(0);
        const T* a = A + i * K;
        for (size_t k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + k * N;
            for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    };
    util::parallel_for(M, threads, rows);
}

// C[K,N] += A[M,K]^T * B[M,N]. Each worker owns a contiguous range of k and
// scans m in order, so accumulation order per element is fixed.
template <typename T>
void gemm_at_b_acc(size_t M, size_t N, size_t K, const T* A, const T* B, T* C, unsigned threads) {
    if (threads <= 1 || K == 1) {
        for (size_t m = 0; m < M; ++m) {
            const T* a = A + m * K;
            const T* b = B + m * N;
            for (size_t k = 0; k < K; ++k) {
                const T av = a[k];
                if (av == T(0)) continue;
                T* c = C + k * N;
                for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
            }
        }
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<size_t>(threads, K));
    const size_t chunk = (K + workers - 1) / workers;
    util::parallel_for(workers, workers, [&](size_t w) {
        const size_t k0 = w * chunk;
        const size_t k1 = std::min(K, k0 + chunk);
        for (size_t m = 0; m < M; ++m) {
            const T* a = A + m * K;
            const T* b = B + m * N;
            for (size_t k = k0; k < k1; ++k) {
                const T av = a[k];
                if (av == T(0)) continue;
                T* c = C + k * N;
                for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
            }
        }
    });
}

// C[M,K] = A[M,N] * B[K,N]^T. Row-partitioned dot products.
template <typename T>
void gemm_a_bt(size_t M, size_t N, size_t K, const T* A, const T* B, T* C, unsigned threads) {
    util::parallel_for(M, threads, [&](size_t i) {
        const T* a = A + i * N;
        T* c = C + i * K;
        for (size_t k = 0; k < K; ++k) {
            const T* b = B + k * N;
            T acc = T(0);
            for (size_t j = 0; j < N; ++j) acc += a[j] * b[j];
            c[k] = acc;
        }
    });
}

}  // namespace detail
}  // namespace mwaser::nn
