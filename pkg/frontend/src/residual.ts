/** Residual view: |out - in| amplified by a gain that is always displayed. */

export function residualPixels(
  input: Uint8ClampedArray,
  output: Uint8ClampedArray,
  gain: number,
): Uint8ClampedArray {
  if (input.length !== output.length) {
    throw new Error(`pixel buffers differ: ${input.length} vs ${output.length}`);
  }
  const out = new Uint8ClampedArray(input.length);
  for (let i = 0; i < input.length; i += 4) {
    out[i] = Math.min(255, Math.abs(output[i] - input[i]) * gain);
    out[i + 1] = Math.min(255, Math.abs(output[i + 1] - input[i + 1]) * gain);
    out[i + 2] = Math.min(255, Math.abs(output[i + 2] - input[i + 2]) * gain);
    out[i + 3] = 255;
  }
  return out;
}
