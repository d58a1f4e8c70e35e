/* yflow_kernel: os dataflow, aux input/weight/output 0/0/0, int8, neon_c. Generated by yflow. */
#ifndef YFLOW_KERNEL_H_
#define YFLOW_KERNEL_H_

/* layer ih=2 iw=3 ic=16 oc=2 fh=1 fw=1 s=1 pad=0, x=16 */
#include <stdint.h>
#include <arm_neon.h>

typedef struct { int8x16_t b[1]; int32x4_t a[2]; } yf_vec;

static inline void yflow_kernel(const int8_t* input, const int8_t* weight, int32_t* output) {
  for (int i = 0; i < 12; ++i) output[i] = 0;
  for (int cb = 0; cb < 1; ++cb) {
    for (int k = 0; k < 2; ++k) {
      const long in_base = (long)cb * 96;
      const long wt_base = ((long)cb * 2 + k) * 16;
      int32_t* out = output + (long)k * 6;
      yf_vec v0;
      yf_vec v1;
      yf_vec v2;
      int32_t s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 0 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[0] += s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 16 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[1] += s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 32 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[2] += s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 48 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[3] += s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 64 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[4] += s0;
      v2.a[0] = vdupq_n_s32(0);
      v2.a[1] = vdupq_n_s32(0);
      v0.b[0] = vld1q_s8(input + in_base + 80 + 0);
      v1.b[0] = vld1q_s8(weight + wt_base + 0 + 0);
      v0.a[0] = vpaddlq_s16(vmull_s8(vget_low_s8(v0.b[0]), vget_low_s8(v1.b[0])));
      v0.a[1] = vpaddlq_s16(vmull_high_s8(v0.b[0], v1.b[0]));
      v2.a[0] = vaddq_s32(v2.a[0], v0.a[0]);
      v2.a[1] = vaddq_s32(v2.a[1], v0.a[1]);
      s0 = vaddvq_s32(v2.a[0]) + vaddvq_s32(v2.a[1]);
      out[5] += s0;
    }
  }
}

#endif  /* YFLOW_KERNEL_H_ */
