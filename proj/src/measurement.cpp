#include "sps/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sps {
namespace {

constexpr long kChunk = 8192;
constexpr std::uint32_t kSignalStream = 0x5167;
constexpr std::uint32_t kReferenceStream = 0x7265;

std::mt19937_64 chunk_engine(std::uint64_t seed, long chunk, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), stream};
  return std::mt19937_64(seq);
}

/// Runs body(chunk_index, first, last) over all chunks, splitting chunks
/// statically across threads. Output placement is index based, so the result
/// does not depend on the thread count.
template <class Body>
void for_each_chunk(long n, int threads, Body body) {
  const long chunks = (n + kChunk - 1) / kChunk;
  auto work = [&](long c0, long c1) {
    for (long c = c0; c < c1; ++c) body(c, c * kChunk, std::min(n, (c + 1) * kChunk));
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(chunks)));
  if (threads == 1) {
    work(0, chunks);
    return;
  }
  std::vector<std::thread> pool;
  const long per = (chunks + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long c0 = t * per;
    const long c1 = std::min(chunks, c0 + per);
    if (c0 < c1) pool.emplace_back(work, c0, c1);
  }
  for (auto& th : pool) th.join();
}

double bridge(double frequency, double z0) { return std::sqrt(2.0 * z0 * kHbar * kTwoPi * frequency); }

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

void accumulate(cd s, Eigen::Matrix<cd, 5, 5>& acc) {
  const double x = std::norm(s);
  const cd s2 = s * s;
  const cd s3 = s2 * s;
  acc(0, 0) += 1.0;
  acc(0, 1) += s;
  acc(0, 2) += s2;
  acc(0, 3) += s3;
  acc(0, 4) += s2 * s2;
  acc(1, 1) += x;
  acc(1, 2) += x * s;
  acc(1, 3) += x * s2;
  acc(2, 2) += x * x;
}

Eigen::Matrix<cd, 5, 5> finish(Eigen::Matrix<cd, 5, 5> acc, double count) {
  acc /= count;
  for (int n = 0; n <= 4; ++n) {
    acc(n, n) = acc(n, n).real();
    for (int k = n + 1; n + k <= 4; ++k) acc(k, n) = std::conj(acc(n, k));
  }
  return acc;
}

}  // namespace

void MeasurementConfig::validate() const {
  if (!(gain > 0.0)) throw std::invalid_argument("MeasurementConfig.gain: must be > 0");
  if (!(noise_photons >= 0.0)) throw std::invalid_argument("MeasurementConfig.noise_photons: must be >= 0");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("MeasurementConfig.sample_rate: must be > 0");
  if (n_shots < 1) throw std::invalid_argument("MeasurementConfig.n_shots: must be >= 1");
  if (!(frequency > 0.0)) throw std::invalid_argument("MeasurementConfig.frequency: must be > 0");
  if (!(z0 > 0.0)) throw std::invalid_argument("MeasurementConfig.z0: must be > 0");
}

void ShotSet::validate() const {
  if (signal.size() != reference.size()) throw std::invalid_argument("ShotSet: length mismatch");
  if (!signal.allFinite() || !reference.allFinite()) throw std::invalid_argument("ShotSet: non-finite shot");
}

Eigen::VectorXd mode_filter(double filter_rate, double dt, Eigen::Index n) {
  const double g = kTwoPi * filter_rate;
  Eigen::VectorXd f(n);
  for (Eigen::Index k = 0; k < n; ++k) f[k] = std::exp(-0.5 * g * dt * static_cast<double>(k));
  f /= std::sqrt(f.squaredNorm() * dt);
  return f;
}

double min_record_duration(double filter_rate) { return 5.0 / (kTwoPi * filter_rate); }

cd mode_match(const ComplexEnvelope& record, double filter_rate, double gain, double frequency,
              double z0) {
  if (!(filter_rate > 0.0)) throw std::domain_error("mode_match: filter_rate must be > 0");
  if (record.duration() < min_record_duration(filter_rate) * (1.0 - 1e-9)) {
    throw std::domain_error("mode_match: record shorter than 5 filter time constants");
  }
  const Eigen::VectorXd f = mode_filter(filter_rate, record.dt, record.size());
  const cd s = (f.cast<cd>().array() * record.samples.array()).sum() * record.dt;
  return s / (std::sqrt(gain) * bridge(frequency, z0));
}

ShotSet synthesize_shots(const ComplexEnvelope& emission, const MeasurementConfig& config,
                         double filter_rate) {
  config.validate();
  emission.validate();
  if (!(filter_rate > 0.0)) throw std::domain_error("synthesize_shots: filter_rate must be > 0");
  if (emission.duration() < min_record_duration(filter_rate) * (1.0 - 1e-9)) {
    throw std::domain_error("synthesize_shots: emission shorter than 5 filter time constants");
  }
  const double dt = 1.0 / config.sample_rate;
  const auto n = static_cast<Eigen::Index>(std::floor(emission.duration() / dt + 1e-9)) + 1;
  Eigen::VectorXcd e(n);
  for (Eigen::Index k = 0; k < n; ++k) e[k] = emission.at(emission.t0 + static_cast<double>(k) * dt);
  const Eigen::VectorXd f = mode_filter(filter_rate, dt, n);
  const double k_volt = std::sqrt(config.gain) * bridge(config.frequency, config.z0);
  const double sd = std::sqrt(0.5 * config.total_noise() / dt);

  ShotSet out;
  out.filter_rate = filter_rate;
  out.signal.resize(config.n_shots);
  out.reference.resize(config.n_shots);
  for_each_chunk(config.n_shots, config.threads, [&](long chunk, long first, long last) {
    auto rng_s = chunk_engine(config.seed, chunk, kSignalStream);
    auto rng_r = chunk_engine(config.seed, chunk, kReferenceStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long i = first; i < last; ++i) {
      cd s = 0.0, r = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const cd ns(sd * normal(rng_s), sd * normal(rng_s));
        const cd nr(sd * normal(rng_r), sd * normal(rng_r));
        const cd v_sig = k_volt * (e[k] + ns);
        const cd v_ref = k_volt * nr;
        s += f[k] * v_sig;
        r += f[k] * v_ref;
      }
      out.signal[i] = s * dt / k_volt;
      out.reference[i] = r * dt / k_volt;
    }
  });
  return out;
}

DensityMatrix emission_mode_state(const Eigen::MatrixXcd& qubit, const RateSet& rates,
                                  double filter_rate, double detuning) {
  if (qubit.rows() < 2 || qubit.cols() != qubit.rows()) {
    throw std::invalid_argument("emission_mode_state: qubit state must be square, dim >= 2");
  }
  if (!(filter_rate > 0.0)) throw std::domain_error("emission_mode_state: filter_rate must be > 0");
  const double gf = filter_rate;
  const double gr = rates.gamma_r;
  const cd sm = qubit(1, 0);
  const double p1 = qubit(1, 1).real();
  const cd mean = cd(0.0, -std::sqrt(gr * gf)) * sm / cd(0.5 * gf + rates.gamma_2, detuning);
  const double n = gr * gf * p1 / (gf + rates.gamma_1) * 2.0 *
                   std::real(1.0 / cd(0.5 * gf + rates.gamma_2, -detuning));
  Matrix3c rho = Matrix3c::Zero();
  rho(0, 0) = 1.0 - n;
  rho(1, 1) = n;
  rho(1, 0) = mean;  // <a> = tr(rho a) = rho(1, 0)
  rho(0, 1) = std::conj(mean);
  DensityMatrix dm(rho);
  return dm.is_valid(1e-12) ? dm : dm.projected();
}

ShotSet synthesize_state_shots(const DensityMatrix& mode, const MeasurementConfig& config,
                               double filter_rate) {
  config.validate();
  mode.validate();
  const double extra = config.total_noise() - 1.0;
  if (extra < -1e-12) {
    throw std::invalid_argument("synthesize_state_shots: total noise below the heterodyne vacuum");
  }
  const double sd_extra = std::sqrt(0.5 * std::max(extra, 0.0));
  // Husimi sampling by rejection from CN(0, 2); Q/g <= 3.82 for any state in
  // the three-level space.
  constexpr double kBound = 3.82;
  const Matrix3c rho = mode.rho;
  auto husimi_ratio = [&](cd beta) {
    const double x = std::norm(beta);
    const Eigen::Vector3cd c(1.0, beta, beta * beta / std::sqrt(2.0));
    const double q = std::exp(-x) * (c.adjoint() * rho * c)(0, 0).real() / std::numbers::pi;
    const double g = std::exp(-0.5 * x) / (kTwoPi);
    return q / g;
  };
  ShotSet out;
  out.filter_rate = filter_rate;
  out.signal.resize(config.n_shots);
  out.reference.resize(config.n_shots);
  for_each_chunk(config.n_shots, config.threads, [&](long chunk, long first, long last) {
    auto rng_s = chunk_engine(config.seed, chunk, kSignalStream);
    auto rng_r = chunk_engine(config.seed, chunk, kReferenceStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (long i = first; i < last; ++i) {
      cd beta;
      do {
        beta = cd(normal(rng_s), normal(rng_s));
      } while (uni(rng_s) * kBound > husimi_ratio(beta));
      out.signal[i] = beta + cd(sd_extra * normal(rng_s), sd_extra * normal(rng_s));
      const cd vac(std::sqrt(0.5) * normal(rng_r), std::sqrt(0.5) * normal(rng_r));
      out.reference[i] = vac + cd(sd_extra * normal(rng_r), sd_extra * normal(rng_r));
    }
  });
  return out;
}

Eigen::Matrix<cd, 5, 5> raw_moments(const Eigen::VectorXcd& shots) {
  Eigen::Matrix<cd, 5, 5> acc = Eigen::Matrix<cd, 5, 5>::Zero();
  for (Eigen::Index i = 0; i < shots.size(); ++i) accumulate(shots[i], acc);
  return finish(acc, static_cast<double>(shots.size()));
}

Eigen::Matrix<cd, 5, 5> deconvolve_moments(const Eigen::Matrix<cd, 5, 5>& raw, double noise) {
  Eigen::Matrix<cd, 5, 5> m = Eigen::Matrix<cd, 5, 5>::Zero();
  for (int order = 0; order <= 4; ++order) {
    for (int n = 0; n <= order; ++n) {
      const int k = order - n;
      if (n > k) continue;
      cd v = raw(n, k);
      for (int p = 1; p <= n; ++p) {
        v -= binom(n, p) * binom(k, p) * factorial(p) * std::pow(noise, p) * m(n - p, k - p);
      }
      m(n, k) = v;
    }
  }
  for (int n = 0; n <= 4; ++n) {
    m(n, n) = m(n, n).real();
    for (int k = n + 1; n + k <= 4; ++k) m(k, n) = std::conj(m(n, k));
  }
  return m;
}

MomentSet extract_field_moments(const ShotSet& shots, int max_order, int bootstrap,
                                std::uint64_t seed, int threads) {
  shots.validate();
  if (max_order < 1 || max_order > kMaxMomentOrder) {
    throw std::invalid_argument("extract_field_moments: max_order must be in [1, 4]");
  }
  const Eigen::Index ns = shots.size();
  if (ns < 1) throw std::invalid_argument("extract_field_moments: no shots");
  auto estimate = [&](const Eigen::Matrix<cd, 5, 5>& rs, const Eigen::Matrix<cd, 5, 5>& rr) {
    Eigen::Matrix<cd, 5, 5> m = deconvolve_moments(rs, rr(1, 1).real());
    for (int n = 0; n <= 4; ++n)
      for (int k = 0; n + k <= 4; ++k)
        if (n + k > max_order) m(n, k) = 0.0;
    return m;
  };
  MomentSet out;
  out.n_shots = static_cast<long>(ns);
  out.m = estimate(raw_moments(shots.signal), raw_moments(shots.reference));

  if (bootstrap >= 2) {
    std::vector<Eigen::Matrix<cd, 5, 5>> draws(static_cast<std::size_t>(bootstrap));
    auto resample = [&](const Eigen::VectorXcd& x, std::mt19937_64& rng) {
      std::uniform_int_distribution<Eigen::Index> pick(0, ns - 1);
      Eigen::Matrix<cd, 5, 5> acc = Eigen::Matrix<cd, 5, 5>::Zero();
      for (Eigen::Index i = 0; i < ns; ++i) accumulate(x[pick(rng)], acc);
      return finish(acc, static_cast<double>(ns));
    };
    // every draw owns its seed, so the result does not depend on the thread count
    auto work = [&](int b0, int b1) {
      for (int b = b0; b < b1; ++b) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(b), 0xb007u};
        std::mt19937_64 rng(seq);
        const auto rs = resample(shots.signal, rng);
        const auto rr = resample(shots.reference, rng);
        draws[static_cast<std::size_t>(b)] = estimate(rs, rr);
      }
    };
    const int nt = std::max(1, std::min(threads, bootstrap));
    std::vector<std::thread> pool;
    const int per = (bootstrap + nt - 1) / nt;
    for (int b0 = per; b0 < bootstrap; b0 += per) pool.emplace_back(work, b0, std::min(bootstrap, b0 + per));
    work(0, std::min(bootstrap, per));
    for (auto& t : pool) t.join();
    Eigen::Matrix<cd, 5, 5> mean = Eigen::Matrix<cd, 5, 5>::Zero();
    for (const auto& d : draws) mean += d;
    mean /= static_cast<double>(bootstrap);
    Eigen::Matrix<double, 5, 5> var = Eigen::Matrix<double, 5, 5>::Zero();
    double cov = 0.0;
    for (const auto& d : draws) {
      var += (d - mean).cwiseAbs2();
      cov += (d(1, 1).real() - mean(1, 1).real()) * (d(2, 2).real() - mean(2, 2).real());
    }
    out.sigma = (var / static_cast<double>(bootstrap - 1)).cwiseSqrt();
    out.cov_11_22 = cov / static_cast<double>(bootstrap - 1);
  }
  out.insufficient_shots = max_order >= 4 && ns < 10000;
  out.nonphysical = out.m(1, 1).real() < -3.0 * out.sigma(1, 1);
  return out;
}

void write_shots_csv(const std::string& path, const ShotSet& shots) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# sps shots v1; filter_rate=" << shots.filter_rate << " Hz; units=photon amplitude\n";
  os << "shot,re_s,im_s,re_r,im_r\n";
  char buf[160];
  for (Eigen::Index i = 0; i < shots.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%ld,%.10e,%.10e,%.10e,%.10e\n", static_cast<long>(i),
                  shots.signal[i].real(), shots.signal[i].imag(), shots.reference[i].real(),
                  shots.reference[i].imag());
    os << buf;
  }
}

}  // namespace sps
