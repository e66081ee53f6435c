#ifndef MIXLINK_H
#define MIXLINK_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MixStatus {
  MIX_STATUS_OK = 0,
  MIX_STATUS_NULL_POINTER = 1,
  MIX_STATUS_INVALID_ARGUMENT = 2,
  MIX_STATUS_RUNTIME = 3,
  MIX_STATUS_PANIC = 4,
} MixStatus;

/*
 A link function bound to the loss it was built for.
 */
typedef struct MixLink MixLink;

/*
 A catalog proper loss.
 */
typedef struct MixLoss MixLoss;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *mix_last_error(void);

/*
 Creates a catalog loss (`log`, `square_vector`, `square_scalar`,
 `boosting`, `absolute`, `zero_one`) over `n` classes.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MixStatus mix_loss_new(const char *name, uintptr_t n, struct MixLoss **out);

/*
 # Safety
 `loss` must come from `mix_loss_new` and not have been freed; null is ignored.
 */
void mix_loss_free(struct MixLoss *loss);

/*
 Writes the `n` partial losses at prediction `q` into `out`.

 # Safety
 `q` and `out` must point to `n` doubles.
 */
enum MixStatus mix_loss_partial(const struct MixLoss *loss,
                                const double *q,
                                uintptr_t n,
                                double *out);

/*
 `p'ℓ(q)`.

 # Safety
 `p` and `q` must point to `n` doubles; `out` must be writable.
 */
enum MixStatus mix_loss_conditional_risk(const struct MixLoss *loss,
                                         const double *p,
                                         const double *q,
                                         uintptr_t n,
                                         double *out);

/*
 Weight function `w(p̃)` of a binary loss.

 # Safety
 `out` must be writable.
 */
enum MixStatus mix_loss_weight(const struct MixLoss *loss, double p, double *out);

/*
 # Safety
 `out` must be writable.
 */
enum MixStatus mix_loss_mixability(const struct MixLoss *loss, double *out);

/*
 Creates a link (`identity`, `canonical`, `psi_star`, `geometric`) for a
 binary loss. `beta` is used by the geometric link only; pass NaN for the
 loss's mixability constant.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MixStatus mix_link_new(const struct MixLoss *loss,
                            const char *name,
                            double beta,
                            struct MixLink **out);

/*
 # Safety
 `link` must come from `mix_link_new` and not have been freed; null is ignored.
 */
void mix_link_free(struct MixLink *link);

/*
 # Safety
 `out` must be writable.
 */
enum MixStatus mix_link_forward(const struct MixLink *link, double p, double *out);

/*
 # Safety
 `out` must be writable.
 */
enum MixStatus mix_link_invert(const struct MixLink *link, double v, double *out);

/*
 Midpoint grid test of `α`-exp-concavity for the composite loss.
 `verdict` receives 1 or 0.

 # Safety
 `verdict` and `min_slack` must be writable.
 */
enum MixStatus mix_check_exp_concavity(const struct MixLink *link,
                                       double alpha,
                                       int32_t *verdict,
                                       double *min_slack);

/*
 Analytic curvature test of `α`-exp-concavity for the composite loss.

 # Safety
 `verdict` and `min_slack` must be writable.
 */
enum MixStatus mix_check_prop5(const struct MixLink *link,
                               double alpha,
                               int32_t *verdict,
                               double *min_slack);

/*
 # Safety
 `y` and `v` must point to `n` doubles; `out` must be writable.
 */
enum MixStatus mix_kl_loss(const double *y, const double *v, uintptr_t n, double *out);

/*
 `ln N / η`.

 # Safety
 `out` must be writable.
 */
enum MixStatus mix_regret_bound(uintptr_t n, double eta, double *out);

/*
 Plays a binary game against constant experts. `algorithm` is `aa` or
 `waa`; `substitution` names the substitution function. Outcomes are 0 or 1.

 # Safety
 `experts` must point to `n_experts` doubles and `outcomes` to `t`
 bytes; `regret` and `bound` must be writable.
 */
enum MixStatus mix_run_game(const struct MixLoss *loss,
                            const char *algorithm,
                            const char *substitution,
                            double eta,
                            const double *experts,
                            uintptr_t n_experts,
                            const uint8_t *outcomes,
                            uintptr_t t,
                            double *regret,
                            double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXLINK_H */
