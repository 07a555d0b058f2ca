/**
 * Request signing compatible with the service's certificate authentication.
 *
 * The signed message is `METHOD\npath?query\nsha256(body)\ncert_id`; headers
 * carry the base64 certificate and the hex signature. The bundled signer
 * implements only the hmac-demo scheme (shared-key MAC) for development
 * setups whose PKI runs that scheme; production deployments terminate real
 * certificate sessions in front of the service instead of signing in the
 * browser.
 */

export interface IdentityFile {
  certificate: string;
  private_key: string;
  scheme?: string;
}

export interface AuthProvider {
  headers(method: string, pathQs: string, body: string): Promise<Record<string, string>>;
}

export class NoAuth implements AuthProvider {
  async headers(): Promise<Record<string, string>> {
    return {};
  }
}

function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

function bytesToHex(bytes: ArrayBuffer): string {
  return [...new Uint8Array(bytes)].map((b) => b.toString(16).padStart(2, "0")).join("");
}

function base64Encode(text: string): string {
  if (typeof btoa === "function") {
    return btoa(String.fromCharCode(...new TextEncoder().encode(text)));
  }
  return Buffer.from(text, "utf-8").toString("base64");
}

export class HmacDemoSigner implements AuthProvider {
  private certId: string;

  constructor(private identity: IdentityFile) {
    const cert = JSON.parse(identity.certificate);
    if (cert.scheme !== "hmac-demo") {
      throw new Error(`HmacDemoSigner cannot sign for scheme ${cert.scheme}`);
    }
    this.certId = cert.cert_id;
  }

  async headers(method: string, pathQs: string, body: string): Promise<Record<string, string>> {
    const encoder = new TextEncoder();
    const bodyDigest = bytesToHex(await crypto.subtle.digest("SHA-256", encoder.encode(body)));
    const message = `${method.toUpperCase()}\n${pathQs}\n${bodyDigest}\n${this.certId}`;
    const key = await crypto.subtle.importKey(
      "raw",
      hexToBytes(this.identity.private_key),
      { name: "HMAC", hash: "SHA-256" },
      false,
      ["sign"],
    );
    const signature = await crypto.subtle.sign("HMAC", key, encoder.encode(message));
    return {
      "x-client-cert": base64Encode(this.identity.certificate),
      "x-client-signature": bytesToHex(signature),
    };
  }
}
