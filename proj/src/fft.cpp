#include "tsmq/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace tsmq {

// Plans are cached per transform size and reused for the life of the
// process. FFTW_UNALIGNED keeps them valid for any caller buffer; plan
// creation is serialized (FFTW's planner is not thread safe), execution of
// an existing plan on distinct buffers is.
namespace {

struct PlanCache {
    std::mutex mutex;
    std::map<std::size_t, fftw_plan> forward;
    std::map<std::size_t, fftw_plan> inverse;

    ~PlanCache()
    {
        for (auto& [n, plan] : forward)
            fftw_destroy_plan(plan);
        for (auto& [n, plan] : inverse)
            fftw_destroy_plan(plan);
    }
};

PlanCache& cache()
{
    static PlanCache c;
    return c;
}

fftw_plan forward_plan(std::size_t n)
{
    PlanCache& c = cache();
    std::lock_guard<std::mutex> lock(c.mutex);
    auto it = c.forward.find(n);
    if (it != c.forward.end())
        return it->second;
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    c.forward.emplace(n, plan);
    return plan;
}

fftw_plan inverse_plan(std::size_t n)
{
    PlanCache& c = cache();
    std::lock_guard<std::mutex> lock(c.mutex);
    auto it = c.inverse.find(n);
    if (it != c.inverse.end())
        return it->second;
    std::vector<std::complex<double>> in(n / 2 + 1);
    std::vector<double> out(n);
    fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                          reinterpret_cast<fftw_complex*>(in.data()),
                                          out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    c.inverse.emplace(n, plan);
    return plan;
}

} // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& frame)
{
    const std::size_t n = frame.size();
    if (n == 0)
        throw std::invalid_argument("rfft: empty frame");

    std::vector<double> in(frame); // r2c transforms may scribble on input
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(forward_plan(n), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& bins, std::size_t n)
{
    if (bins.size() != n / 2 + 1)
        throw std::invalid_argument("irfft: bin count does not match transform size");

    std::vector<std::complex<double>> in(bins); // c2r destroys its input
    std::vector<double> out(n);
    fftw_execute_dft_c2r(inverse_plan(n), reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    for (double& v : out)
        v /= static_cast<double>(n);
    return out;
}

} // namespace tsmq
