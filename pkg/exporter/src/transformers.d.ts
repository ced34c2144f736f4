// Ambient declaration for the optional peer dependency; installed only when
// hub access is available, so the build cannot rely on its bundled types.
declare module "@huggingface/transformers" {
  export const AutoTokenizer: {
    from_pretrained(id: string, opts?: object): Promise<any>;
  };
  export const AutoModel: {
    from_pretrained(id: string, opts?: object): Promise<any>;
  };
}
