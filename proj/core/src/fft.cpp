#include "qsmlot/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace qsmlot::fft {

namespace {

// FFTW's planner is not thread-safe; plan creation and lookup are guarded.
// Plans are created with FFTW_UNALIGNED so they can execute on any buffer.
class PlanCache {
 public:
  fftw_plan get(Dims3 dims, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const Key key{dims.nx, dims.ny, dims.nz, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    // FFTW is row-major (last dim fastest); our canonical order is x
    // fastest, so x is passed last.
    fftw_plan p = fftw_plan_dft_3d(dims.nz, dims.ny, dims.nx, nullptr, nullptr,
                                   sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

 private:
  using Key = std::tuple<int, int, int, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(Dims3 dims, int sign, const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out) {
  out = in;  // fftw_execute_dft works in place on the copy
  fftw_plan p = cache().get(dims, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(p, buf, buf);
}

}  // namespace

std::vector<std::complex<double>> forward(Dims3 dims, const std::vector<std::complex<double>>& in) {
  std::vector<std::complex<double>> out;
  execute(dims, FFTW_FORWARD, in, out);
  return out;
}

std::vector<std::complex<double>> inverse(Dims3 dims, const std::vector<std::complex<double>>& in) {
  std::vector<std::complex<double>> out;
  execute(dims, FFTW_BACKWARD, in, out);
  const double scale = 1.0 / static_cast<double>(dims.count());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace qsmlot::fft
