class SessionRedirectMixin(object):
    def resolve_redirects(self, resp, req, stream=False, timeout=None, verify=True, cert=None, proxies=None):
        url = resp.headers['location']
        prepared_request = req.copy()
        headers = prepared_request.headers
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
