class SessionRedirectMixin(object):
    def resolve_redirects(self, resp, req, stream=False, timeout=None, verify=True, cert=None, proxies=None):
        url = resp.headers['location']
        prepared_request = req.copy()
        headers = prepared_request.headers
        original_parsed = urlparse(resp.request.url)
        redirect_parsed = urlparse(url)
        if (original_parsed.hostname != redirect_parsed.hostname and 'Authorization' in headers):
            del headers['Authorization']
        resp = self.send(
            prepared_request,
            stream=stream,
            timeout=timeout,
            verify=verify,
            cert=cert,
            proxies=proxies,
            allow_redirects=False,
        )
        return resp
