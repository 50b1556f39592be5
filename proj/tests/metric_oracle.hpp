#pragma once

// Brute-force metric oracle. Every quantity is tallied cell by cell into GMP
// rationals, combined with the textbook formulas (F1 as the harmonic mean of
// P and R, macro as a plain mean of F1s), and rounded once with MPFR at 53
// bits, round-to-nearest. It shares no code with the library.

#include <gmp.h>
#include <mpfr.h>

#include <cstddef>
#include <vector>

#include "goemo/dense.hpp"

namespace goemo::testing {

class Rational {
   public:
    Rational() { mpq_init(q_); }
    Rational(long num, unsigned long den) {
        mpq_init(q_);
        mpq_set_si(q_, num, den);
        mpq_canonicalize(q_);
    }
    Rational(const Rational& o) {
        mpq_init(q_);
        mpq_set(q_, o.q_);
    }
    Rational& operator=(const Rational& o) {
        mpq_set(q_, o.q_);
        return *this;
    }
    ~Rational() { mpq_clear(q_); }

    bool is_zero() const { return mpq_sgn(q_) == 0; }

    friend Rational operator+(const Rational& a, const Rational& b) {
        Rational r;
        mpq_add(r.q_, a.q_, b.q_);
        return r;
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        Rational r;
        mpq_mul(r.q_, a.q_, b.q_);
        return r;
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        Rational r;
        mpq_div(r.q_, a.q_, b.q_);
        return r;
    }

    // Correctly rounded to the nearest double.
    double to_double() const {
        mpfr_t f;
        mpfr_init2(f, 53);
        mpfr_set_q(f, q_, MPFR_RNDN);
        const double d = mpfr_get_d(f, MPFR_RNDN);
        mpfr_clear(f);
        return d;
    }

   private:
    mpq_t q_;
};

// a / b, or 0 when b is 0.
inline Rational ratio(long a, long b) { return b == 0 ? Rational(0, 1) : Rational(a, static_cast<unsigned long>(b)); }

struct OracleLabel {
    double precision, recall, f1;
    long support;
};

struct OracleMetrics {
    double subset_accuracy;
    double hamming_loss;
    std::vector<OracleLabel> labels;
    double micro_f1;
    double macro_f1;
};

inline Rational harmonic(const Rational& p, const Rational& r) {
    const Rational s = p + r;
    if (s.is_zero()) return Rational(0, 1);
    return Rational(2, 1) * p * r / s;
}

inline OracleMetrics brute_force_metrics(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    const long N = pred.rows(), K = pred.cols();
    OracleMetrics m;
    long exact_rows = 0, mismatched = 0;
    for (long i = 0; i < N; ++i) {
        bool same = true;
        for (long k = 0; k < K; ++k) {
            if ((pred(i, k) != 0) != (gold(i, k) != 0)) {
                same = false;
                ++mismatched;
            }
        }
        exact_rows += same ? 1 : 0;
    }
    m.subset_accuracy = ratio(exact_rows, N).to_double();
    m.hamming_loss = ratio(mismatched, N * K).to_double();

    long TP = 0, FP = 0, FN = 0;
    Rational f1_sum(0, 1);
    for (long k = 0; k < K; ++k) {
        long tp = 0, fp = 0, fn = 0;
        for (long i = 0; i < N; ++i) {
            const bool p = pred(i, k) != 0, g = gold(i, k) != 0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        TP += tp;
        FP += fp;
        FN += fn;
        const Rational P = ratio(tp, tp + fp), R = ratio(tp, tp + fn);
        const Rational F = harmonic(P, R);
        f1_sum = f1_sum + F;
        m.labels.push_back({P.to_double(), R.to_double(), F.to_double(), tp + fn});
    }
    m.micro_f1 = harmonic(ratio(TP, TP + FP), ratio(TP, TP + FN)).to_double();
    m.macro_f1 = (f1_sum / Rational(K, 1)).to_double();
    return m;
}

}  // namespace goemo::testing
